//! Benchmark harness for stationary MMD point sets: JSON experiment configs,
//! dataset ingestion, method-by-size grids, result files and rate fits.

// `!(x > 0.0)` is used on purpose so NaN values are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod output;
pub mod rate;

pub use config::{load_config, ExperimentConfig, IntegrandSpec, Method, TargetSpec};
pub use error::{BenchError, Result};
pub use experiment::{cell_seed, run_experiment, Outcome};
pub use output::{parse_results, summarize, write_results, ResultRow, Summary};
pub use rate::{fit_log_log, fit_rate, RateFit};
