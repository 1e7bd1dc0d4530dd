//! Experiment runner for the `shapeopt` library: problem files in TOML,
//! presets, optimization runs with multiplier recovery and regularity
//! classification, derivative checks and parameter sweeps.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify_cmd;
pub mod error;
pub mod gauge_io;
pub mod presets;
pub mod problem;
pub mod run;
pub mod svg;
pub mod sweep;
pub mod verify;

pub use error::{CliError, CliResult};
pub use presets::{preset, PRESET_NAMES};
pub use problem::{load_problem, parse_problem, problem_schema, ProblemDocument};
pub use run::{run_problem, write_outputs, RunOutcome, RunReport, Section};
