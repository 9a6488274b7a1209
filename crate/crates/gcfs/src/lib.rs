//! Experiment driver for the greedy scheduling model: config files,
//! commands and their JSON/CSV outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::RunOptions;
pub use config::ExperimentConfig;
pub use error::CliError;
