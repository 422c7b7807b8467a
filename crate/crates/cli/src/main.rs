mod args;
mod commands;
mod config;
mod data;
mod error;
mod figures;
mod svg;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::{CliError, CliResult};

/// Sizes the global worker pool from `VIMP_THREADS` when it is set.
fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("VIMP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("VIMP_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Verify(a) => commands::verify(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Figures(a) => commands::figures(a),
        Command::Report(a) => commands::report(a),
        Command::Generate(a) => commands::generate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vimp: {e}");
            e.exit_code()
        }
    }
}
