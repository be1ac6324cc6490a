//! A small 0/1 linear maximization kernel: model container, bounded primal
//! simplex for the relaxations and best-first branch-and-bound with a lazy
//! constraint callback.

mod bnb;
mod simplex;

pub(crate) use bnb::relative_gap;
pub use bnb::{branch_and_bound, AcceptAll, BnBResult, BnBStats, BnBStatus, LazyCallback, LazyCut, Verdict};
pub use simplex::{solve_lp, LpSolution, LpStatus};

use std::fmt::Write as _;
use std::time::Duration;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
    pub objective: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// Rows of kind `Cut` are valid inequalities the relaxation solver may keep
/// out of its working set until they become violated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Structural,
    Cut,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub kind: RowKind,
}

impl Constraint {
    pub fn new(name: impl Into<String>, terms: Vec<(VarId, f64)>, relation: Relation, rhs: f64) -> Self {
        Constraint { name: name.into(), terms, relation, rhs, kind: RowKind::Structural }
    }

    pub fn cut(name: impl Into<String>, terms: Vec<(VarId, f64)>, relation: Relation, rhs: f64) -> Self {
        Constraint { name: name.into(), terms, relation, rhs, kind: RowKind::Cut }
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let act = self.activity(values);
        match self.relation {
            Relation::Le => (act - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - act).max(0.0),
            Relation::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A linear maximization problem over bounded variables.
#[derive(Clone, Debug, Default)]
pub struct LinearModel {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    integral_objective: bool,
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, var: Variable) -> VarId {
        self.vars.push(var);
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> VarId {
        self.add_var(Variable { name: name.into(), lower: 0.0, upper: 1.0, integer: true, objective })
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> VarId {
        self.add_var(Variable { name: name.into(), lower, upper, integer: false, objective })
    }

    pub fn add_constraint(&mut self, c: Constraint) -> usize {
        self.constraints.push(c);
        self.constraints.len() - 1
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Declares that every integer-feasible point has an integral optimal
    /// objective, which lets branch-and-bound round node bounds down.
    pub fn set_integral_objective(&mut self, on: bool) {
        self.integral_objective = on;
    }

    pub fn integral_objective(&self) -> bool {
        self.integral_objective
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.objective * x).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for v in &self.vars {
            if !v.lower.is_finite() {
                problems.push(format!("variable {} needs a finite lower bound", v.name));
            }
            if v.upper.is_nan() || v.lower > v.upper {
                problems.push(format!("variable {} has bounds [{}, {}]", v.name, v.lower, v.upper));
            }
            if !v.objective.is_finite() {
                problems.push(format!("variable {} has objective {}", v.name, v.objective));
            }
            if v.integer && (v.lower.fract() != 0.0 || (v.upper.is_finite() && v.upper.fract() != 0.0)) {
                problems.push(format!("integer variable {} has fractional bounds", v.name));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() || c.terms.iter().any(|&(v, a)| !a.is_finite() || v.0 >= self.vars.len()) {
                problems.push(format!("constraint {} is malformed", c.name));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Input(problems.join("; ")))
        }
    }

    /// Plain-text export in the common LP file layout, one row per line.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::new();
        let term = |out: &mut String, first: bool, coef: f64, name: &str| {
            if first {
                if coef < 0.0 {
                    let _ = write!(out, "- {} {}", -coef, name);
                } else {
                    let _ = write!(out, "{} {}", coef, name);
                }
            } else if coef < 0.0 {
                let _ = write!(out, " - {} {}", -coef, name);
            } else {
                let _ = write!(out, " + {} {}", coef, name);
            }
        };
        out.push_str("Maximize\n obj: ");
        let mut first = true;
        for v in self.vars.iter().filter(|v| v.objective != 0.0) {
            term(&mut out, first, v.objective, &v.name);
            first = false;
        }
        if first {
            out.push('0');
        }
        out.push_str("\nSubject To\n");
        for c in &self.constraints {
            let _ = write!(out, " {}: ", c.name);
            let mut first = true;
            for &(v, a) in &c.terms {
                term(&mut out, first, a, &self.vars[v.0].name);
                first = false;
            }
            if first {
                out.push('0');
            }
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(out, " {rel} {}", c.rhs);
        }
        out.push_str("Bounds\n");
        for v in &self.vars {
            if v.upper.is_finite() {
                let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
            } else {
                let _ = writeln!(out, " {} >= {}", v.name, v.lower);
            }
        }
        let ints: Vec<&str> = self.vars.iter().filter(|v| v.integer).map(|v| v.name.as_str()).collect();
        if !ints.is_empty() {
            out.push_str("General\n");
            for chunk in ints.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }
}

/// Termination controls for branch-and-bound.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveLimits {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<u64>,
    pub gap: f64,
    pub integrality: f64,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits { time_limit: Some(Duration::from_secs(3600)), node_limit: None, gap: 1e-6, integrality: 1e-6 }
    }
}

impl SolveLimits {
    pub fn unlimited() -> Self {
        SolveLimits { time_limit: None, ..Self::default() }
    }

    /// The same limits with `elapsed` already spent from the time budget.
    pub fn remaining(&self, elapsed: Duration) -> Self {
        let time_limit = self.time_limit.map(|t| t.saturating_sub(elapsed).max(Duration::from_nanos(1)));
        SolveLimits { time_limit, ..self.clone() }
    }

    pub fn with_time_limit(mut self, secs: f64) -> Self {
        self.time_limit = Some(Duration::from_secs_f64(secs));
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gap > 0.0
            && self.integrality > 0.0
            && self.time_limit.is_none_or(|t| !t.is_zero())
            && self.node_limit != Some(0);
        if ok {
            Ok(())
        } else {
            Err(Error::input("solve limits must all be positive"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_export_lists_rows() {
        let mut m = LinearModel::new();
        let x = m.add_binary("x", 1.0);
        let y = m.add_binary("y", 2.0);
        m.add_constraint(Constraint::new("c0", vec![(x, 1.0), (y, -1.0)], Relation::Le, 0.5));
        let text = m.to_lp_format();
        assert!(text.contains("obj: 1 x + 2 y"));
        assert!(text.contains("c0: 1 x - 1 y <= 0.5"));
        assert!(text.contains("General\n x y"));
    }

    #[test]
    fn violation_measures() {
        let c = Constraint::new("r", vec![(VarId(0), 1.0), (VarId(1), 1.0)], Relation::Le, 1.0);
        assert_eq!(c.violation(&[1.0, 1.0]), 1.0);
        assert_eq!(c.violation(&[0.5, 0.5]), 0.0);
    }

    #[test]
    fn validation_rejects_bad_bounds() {
        let mut m = LinearModel::new();
        m.add_continuous("x", 1.0, 0.0, 1.0);
        assert!(m.validate().is_err());
    }
}
