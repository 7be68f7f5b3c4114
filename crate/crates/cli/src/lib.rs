//! Library side of the `pseudomarket` command: experiment-file parsing,
//! result formatting and the subcommands.

pub mod commands;
pub mod error;
pub mod file;
pub mod output;

pub use error::CliError;
pub use file::ExperimentFile;
