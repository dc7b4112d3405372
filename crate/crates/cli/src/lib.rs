//! Experiment runner: validated configuration in, deterministic CSV out.

pub mod config;
pub mod run;

pub use config::{parse_args, ExperimentConfig, ValidationErrors};
pub use run::{run, CliError};
