//! Reproducible experiments on top of `cwflow-core`: a rayon executor,
//! CSV/JSON emission with embedded run configuration, and the subcommands of
//! the `cwflow` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod output;

pub use config::{Cli, Command, RunConfig};
pub use error::CliError;

/// Version string embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
