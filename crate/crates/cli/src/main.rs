//! `susbayes`: evidence runs, repeated-run studies, model updating and
//! posterior resampling from the command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input.

mod args;
mod commands;
mod error;
mod manifest;
mod output;
mod settings;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
