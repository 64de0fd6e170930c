//! File formats, run configuration, weight tuning and cross-validation
//! behind the `costregime` command.

pub mod commands;
pub mod config;
pub mod cv;
pub mod error;
pub mod io;
pub mod split;
pub mod tune;
pub mod verify;

pub use config::{Constraints, RunConfig, TuningConfig};
pub use error::{CliError, Result};
