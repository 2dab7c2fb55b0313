//! `dyadlab`: a command-line laboratory for dyadic models of the H1-BMO
//! duality. Exit codes: 0 all checks passed, 1 a mathematical check failed,
//! 2 the inputs never reached the math.

mod commands;
mod manifest;

pub use commands::CliError;

use clap::Parser;
use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

/// Best-effort stderr line; a closed pipe must not turn exit 2 into a panic.
fn stderr_line(text: &str) {
    let _ = writeln!(std::io::stderr(), "{text}");
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cli = commands::Cli::parse();
    let code = match commands::run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            stderr_line(&format!("error: {e}"));
            ExitCode::from(e.exit_code())
        }
    };
    // Timing goes to stderr so the written artifacts stay byte-reproducible.
    stderr_line(&format!("duration_ms={}", start.elapsed().as_millis()));
    code
}
