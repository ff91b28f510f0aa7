//! Partial optimal transport with quadratic and entropic regularization.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod numeric;
pub mod problem;
pub mod qpot;
pub mod apps;
pub mod data;
pub mod epot;
pub mod oracle;
mod ldl;
mod reduced;
mod solve;

pub use error::{PotError, Result};
pub use problem::*;
pub use qpot::{
    dual_gradient, dual_value, mass_projection, primal_from_dual, solve_qpot, solve_qpot_observed, Acceleration,
    DualCertificate, DualGradient, IterateInfo, SolverConfig, StepKind,
};
pub use epot::{round_to_feasible, solve_epot, solve_epot_direct, ScalingState};
pub use oracle::{oracle_epot, oracle_qpot, ActiveSetPattern};
pub use solve::{solve, Solution};
