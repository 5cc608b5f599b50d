//! Experiment harness for decentralized kernel learning: TOML configuration,
//! dataset and edge-list files, trace and summary output, and the pipeline
//! behind the `coke` command line tool.

pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod trace;

pub use config::{ExperimentConfig, Mode};
pub use error::{Result, SimError};
