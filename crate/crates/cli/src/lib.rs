//! Command-line front end: configs, presets, CSV output, convergence studies
//! and the prox oracle check.

pub mod config;
pub mod convergence;
pub mod error;
pub mod experiment;
pub mod presets;
pub mod proxcheck;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
