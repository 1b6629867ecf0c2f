pub mod femu;
pub mod resample;
pub mod run;
pub mod study;

use crate::args::{Cli, Command};
use crate::error::CliResult;

pub fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(a) => run::execute(&a),
        Command::Study(a) => study::execute(&a),
        Command::Femu(a) => femu::execute(&a),
        Command::Resample(a) => resample::execute(&a),
    }
}

/// `theta_1, …, theta_d`.
pub fn theta_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|j| format!("theta_{j}")).collect()
}
