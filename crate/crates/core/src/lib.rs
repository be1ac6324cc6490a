//! Exact solvers for the hybrid discrete–continuous maximal covering location
//! problem.
//!
//! Demand points are covered either by facilities opened at candidate sites
//! (each with its own radius) or by facilities placed freely in space. Two
//! exact routes are provided: a branch-and-cut over an assignment formulation
//! whose cluster-incompatibility rows are separated lazily with enclosing-ball
//! certificates, and a finite candidate-set formulation built from pairwise
//! circle intersections in the Euclidean plane. Sequential baselines and an
//! exhaustive oracle round out the toolkit.

pub mod error;
pub mod geometry;
pub mod io;
pub mod milp;
pub mod model;
pub mod separation;
pub mod solvers;

pub use error::{Error, Result};
