//! Configuration, orchestration and artifact emission for `critwave`.

pub mod artifacts;
pub mod commands;
pub mod config;

pub use commands::{dispatch, CliError, Subcommand};
pub use config::{emit, parse_config, ConfigError, RunConfig};
