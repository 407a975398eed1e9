//! Command-line driver: configuration files, the five subcommands and
//! their JSON/CSV outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{execute, Command, Outcome};
pub use config::{Overrides, RunConfig};
pub use error::CliError;
