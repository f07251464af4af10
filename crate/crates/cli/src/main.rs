//! `transpref` command-line entry point.
//!
//! Exit status: 0 on success, 1 on a pipeline error (reported as one line of
//! JSON on stderr), 2 on a usage error.

mod args;
mod commands;
mod progress;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(err)) => err.exit(),
        Err(commands::Failure::Domain(err)) => {
            let line = serde_json::json!({ "error": err.kind(), "message": err.to_string() });
            eprintln!("{line}");
            ExitCode::from(1)
        }
    }
}
