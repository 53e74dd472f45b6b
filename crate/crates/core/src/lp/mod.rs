//! Small dense linear programming and the Farkas machinery built on it.

mod farkas;
mod simplex;

pub use farkas::{build_perturbation_lp, farkas_certificate, FarkasCertificate, FarkasOutcome, FarkasSystem};
pub use simplex::{solve, LinearConstraint, LpProblem, LpSolution, LpStatus, Relation};
