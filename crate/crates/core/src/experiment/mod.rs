//! Replicated experiments: configuration, the replication loop, results and
//! summary CSVs.

mod calibrate_job;
mod config;
mod runner;
mod summary;

pub use calibrate_job::{run_calibrate, write_bounds, CalibrateJob, CalibrateOutput};
pub use config::{EstimatorKind, EstimatorSpec, ExperimentConfig, MethodSpec};
pub use runner::{fit_estimator, run_experiment, run_replication, write_results, ResultRow, RESULT_HEADER};
pub use summary::{aggregate, read_results, write_summary, SummaryRow, SUMMARY_HEADER};
