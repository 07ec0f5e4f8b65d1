//! Library side of the `bartgp` command line tool, so the commands can be
//! driven from tests without spawning a process.

pub mod args;
pub mod commands;
pub mod data;
pub mod error;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use args::Cli;
pub use error::{CliError, Result};

/// Parse `argv` (including the program name) and run the command, writing
/// the main output to `out`. `--output` is ignored here.
pub fn run_args<I, T>(argv: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| error::usage(e.to_string()))?;
    commands::run(&cli, out)
}
