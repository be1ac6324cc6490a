use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("input error: {0}")]
    Input(String),

    /// One or more instance invariants do not hold.
    #[error("invalid instance: {}", .0.join("; "))]
    Validation(Vec<String>),

    /// The requested operation is not available for this norm / dimension.
    #[error("unsupported: {0}")]
    Capability(String),

    /// A size guard was exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A caller broke an operation's contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Numerical trouble inside the LP / branch-and-bound kernel.
    #[error("solver error: {0}")]
    Solver(String),

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
}
