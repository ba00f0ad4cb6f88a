//! Experiment driver: one binary wrapping the outerbound solver, the
//! scheme builders, the link simulator, the schedulers and the acceptance
//! battery. Every run resolves flags against an optional config file,
//! stamps each emitted record with the resolved-config hash and master
//! seed, and exits nonzero when a verification or acceptance check fails.

mod config;
mod emit;
mod run;

use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

/// Errors that abort a run before any records are produced.
///
/// Verification failures are not in here: those still emit records (a
/// diagnostic one if nothing else) and turn into exit code 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: field {field}: {msg}")]
    Config { field: &'static str, msg: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn main() -> ExitCode {
    let cli = config::Cli::parse();
    match run::execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(2)
        }
    }
}
