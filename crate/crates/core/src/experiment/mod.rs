//! Configuration ingestion, experiment orchestration and result
//! persistence: the user-facing surface behind the CLI.

pub mod config;
pub mod output;
pub mod runners;

pub use config::{ExperimentConfig, DEMO_CONFIG};
pub use output::{RunManifest, Series};
pub use runners::{
    loglog_regression, run_adiabatic_work, run_border, run_decay, run_full_suite, run_scaling,
    self_test, work_run, RunOptions, ScalingReport, SelfTestResult,
};
