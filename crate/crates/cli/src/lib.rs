//! Command-line runner for the `qct-core` experiments: configuration,
//! the named reproductions and atomic result files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::RunConfig;
pub use error::CliError;
