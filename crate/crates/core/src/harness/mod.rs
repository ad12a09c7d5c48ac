//! Experiment orchestration: configuration files, replication sweeps,
//! comparisons with the limits, reports and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod experiment;
pub mod report;

pub use acceptance::{run_all, run_criterion, CriterionResult};
pub use config::ExperimentConfig;
pub use report::Report;
