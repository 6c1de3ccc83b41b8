//! Command-line driver.

mod args;
mod commands;

pub use args::{Cli, Command};

use crate::error::{Error, Result};
use clap::Parser;
use std::ffi::OsString;

/// Exit status for a failed command: 2 for usage errors, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

/// The single-line form printed on failure.
pub fn error_line(err: &Error) -> String {
    let msg = err.to_string().replace(['\n', '\r'], " ");
    format!("error: {}: {}", err.kind(), msg.trim())
}

/// Parses arguments and runs one command. Help and version requests print
/// and return `Ok`.
pub fn run<I, S>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            e.print()?;
            return Ok(());
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            return Err(Error::InvalidArgument(first.to_string()));
        }
    };
    commands::dispatch(cli)
}
