//! Front end for the `flr-core` simulator: TOML configuration with method
//! presets, CSV and JSON artifacts, checkpoints, run comparison and the
//! `flr` command line.

#![warn(missing_docs)]

pub mod checkpoint;
pub mod compare;
pub mod config;
mod defaults;
pub mod error;
pub mod formats;
pub mod runner;

pub use config::{parse_and_validate, parse_with_overrides, ExperimentConfig, Method, Overrides};
pub use error::{ConfigIssue, Result, SimError};
pub use runner::{run, RunManifest, RunOptions};
