//! Experiment runner for the simcmc crate: TOML configs in, JSON reports and
//! aligned tables out.

pub mod config;
pub mod error;
pub mod experiment;
pub mod report;
pub mod stats;
pub mod tracking;
pub mod verify;

pub use config::{ExperimentConfig, TrackingConfig};
pub use error::{HarnessError, Result};
pub use experiment::run_experiment;
pub use report::RunReport;
pub use tracking::tracking_comparison;
pub use verify::verify_kernel;
