//! Experiment configuration and runners behind the `mgda` binary.

pub mod config;
pub mod error;
pub mod run;

pub use config::{ExperimentConfig, Kind, Overrides, Plan};
pub use error::CliError;
pub use run::{execute, Report};
