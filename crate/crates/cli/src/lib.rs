//! Command-line front end for the magsqueeze library.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod report;

pub use commands::{execute, CommandKind, GridSize, Invocation, Outcome};
pub use error::CliError;
