//! Reproducible experiment sweeps over the partial transport solvers.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod sweep;

pub use config::{EpsilonGrid, Experiment, MethodChoice, SweepConfig};
pub use error::{CliError, Result};
pub use output::{decode_plan, emit_heatmap, encode_plan, heatmap_image, read_plan_dump, write_plan_dump, SweepRow};
pub use sweep::{run_points, run_sweep, PointResult, SweepReport};
