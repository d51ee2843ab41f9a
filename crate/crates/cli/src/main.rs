use std::process::ExitCode;

use clap::Parser;
use magsqueeze_cli::cli::Cli;
use magsqueeze_cli::execute;

fn main() -> ExitCode {
    let inv = match Cli::parse().invocation() {
        Ok(inv) => inv,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = execute(&inv);
    if let Some(report) = &outcome.report {
        for line in &report.summary {
            println!("{line}");
        }
    }
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    ExitCode::from(outcome.exit_code() as u8)
}
