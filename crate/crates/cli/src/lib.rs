//! Experiment runner behind the `kanvision` binary: configuration, data
//! fetching, training runs, sweeps, benchmarks and reproduction suites.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod records;
pub mod run;

pub use cli::run;
pub use config::{ConfigOverrides, ExperimentConfig};
pub use error::{CliError, CliResult};
