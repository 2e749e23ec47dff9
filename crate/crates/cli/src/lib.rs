//! Command-line front end for the pancake mechanism laboratory.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use error::{CliError, CliResult};

use std::process::ExitCode;

use clap::Parser;

/// Parses `argv`, runs the subcommand and maps failures to exit codes.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match config::RunConfig::resolve(&cli).and_then(|cfg| commands::dispatch(&cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pancake: {e}");
            e.exit_code()
        }
    }
}
