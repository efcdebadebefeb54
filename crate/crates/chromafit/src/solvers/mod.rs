//! Constrained solvers for the filter subproblems: an active-set quadratic
//! program for bound/linearly constrained least squares and a small dense
//! simplex for coefficient extremes.

pub mod lp;
pub mod qp;

pub use lp::{coefficient_extreme, Sense};
pub use qp::{solve_qp, Bound, BoxLinearConstraints, QpSolution};
