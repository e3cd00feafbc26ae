//! `asf`: command line and REST front ends for the analytics service
//! framework.

pub mod cli;
pub mod rest;
pub mod state;

use clap::Parser;

/// Entry point for the `asf` binary.
pub fn run() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    run_with(&args, &mut stdout, &mut stderr)
}

/// Testable entry point: parse `argv` and execute, writing structured
/// output to `out` and diagnostics to `err`.
pub fn run_with(
    args: &[String],
    out: &mut dyn std::io::Write,
    err: &mut dyn std::io::Write,
) -> i32 {
    match cli::Cli::try_parse_from(args) {
        Ok(parsed) => cli::dispatch(parsed, out, err),
        Err(e) => {
            // Help and version requests are not errors.
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                2
            } else {
                let _ = write!(out, "{e}");
                0
            }
        }
    }
}
