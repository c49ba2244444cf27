//! Scenario files, run configuration, estimator runs and metrics for the
//! `gnss-fgo` command-line tool.

pub mod config;
pub mod error;
pub mod metrics;
pub mod run;
pub mod scenario_io;

pub use config::{Estimator, RunConfig, ScenarioSource, SolverChoice};
pub use error::CliError;
pub use metrics::MetricsReport;
pub use run::{compare, comparison_table, run, run_on, write_run, ComparisonRow, RunOutput};
