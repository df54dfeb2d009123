use std::process::ExitCode;

use clap::Parser;
use fdlsr::cli::{self, Cli};

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    // Usage errors exit with status 2 from inside clap.
    let parsed = Cli::parse();
    match cli::run(parsed, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
