//! `krausopt` — deterministic quantum-channel optimization experiments:
//! process tomography (with optional γ grid search), channel classification
//! on bundled datasets, finite-difference gradient checks, and aggregation
//! of completed runs into summary tables.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure,
//! 4 I/O error.

mod config;
mod manifest;
mod runner;
mod summary;

use clap::Parser;
use config::{Action, Cli};
use krausopt::{Error, Result};
use std::process::ExitCode;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::AtEpoch { source, .. } => exit_code(source),
        Error::Numeric(_) => 3,
        Error::Io(_) | Error::Json(_) => 4,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<()> {
    match config::resolve(cli)? {
        Action::Summarize(args) => summary::emit_summary(&args),
        Action::Experiment(cfg) => runner::execute(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
