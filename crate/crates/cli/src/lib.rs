//! Experiment runner behind the `scfde` binary.
//!
//! Exit codes: 0 success, 1 a requested check missed its tolerance,
//! 2 invalid configuration or unusable output path.

pub mod args;
mod commands;
pub mod output;

use args::Cli;
use clap::Parser;
use std::ffi::OsString;

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Tolerance(String),
    Io(anyhow::Error),
}

impl From<scfde_core::Error> for Failure {
    fn from(e: scfde_core::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Tolerance(msg)) => {
            eprintln!("check failed: {msg}");
            EXIT_TOLERANCE
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            EXIT_CONFIG
        }
    }
}
