//! Experiment layer: configuration, α-sweeps, rate fits, bound
//! comparisons and report files.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod compare;
pub mod config;
pub mod error;
pub mod flows;
pub mod output;
pub mod rates;
pub mod sweep;

pub use config::{DatumSpec, ExperimentConfig};
pub use error::{Result, StudyError};
pub use sweep::{compute_sweep, run_sweep, ConvergenceReport};
