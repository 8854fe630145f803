//! Command-line front end: file ingestion, subcommands, and canonical
//! output for the `expectiled` engine.
//!
//! Exit codes: 0 success, 1 a property or check failed, 2 invalid input,
//! 3 solver non-convergence, 4 cross-check divergence.

pub mod canonical;
pub mod commands;
pub mod input;

use std::ffi::OsString;

use clap::Parser;

pub use commands::{Cli, CliError};

/// Captured result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome {
                    stdout: text,
                    stderr: String::new(),
                    code,
                }
            } else {
                Outcome {
                    stdout: String::new(),
                    stderr: text,
                    code,
                }
            };
        }
    };
    match commands::execute(cli) {
        Ok(report) => Outcome {
            stdout: report.text,
            stderr: String::new(),
            code: if report.passed { 0 } else { 1 },
        },
        Err(e) => Outcome {
            stdout: String::new(),
            stderr: format!("error: {}\n", e.message()),
            code: e.exit_code(),
        },
    }
}
