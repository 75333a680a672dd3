//! Config-driven front end for the off-diagonal phase engines.

pub mod config;
pub mod error;
pub mod run;
pub mod selftest;

pub use config::{parse_config, ExperimentConfig, Mode};
pub use error::CliError;
pub use run::{load_config, run, run_reporting, Overrides, Provenance, RunOptions, RunReport};
