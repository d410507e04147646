//! Library side of the `ftmux` command-line tool, exposed for testing.

pub mod cli;
pub mod commands;
pub mod error;
pub mod plot;
pub mod table;

pub use cli::{run, Cli};
pub use error::{CliError, CliResult};
