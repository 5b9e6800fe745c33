//! Experiment runner for the `fpp-core` percolation library: TOML
//! configuration, a worker pool over seeds, and CSV/JSON outputs with a
//! digest manifest.

pub mod cli;
pub mod commands;
pub mod config;
pub mod exec;
pub mod output;

pub use commands::{run, RunError, RunManifest, Subcommand};
pub use config::{parse_config, ConfigError, ConfigFile, ExperimentConfig, Overrides};
