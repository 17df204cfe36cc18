//! Configuration, file formats and subcommands of the `postsel` tool.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod parallel;

pub use error::CliError;
