//! Thin binary wrapper: parse the config path, run, map errors to exit codes.

use clap::Parser;
use std::path::PathBuf;

/// Recover a phase-space distribution function and mass density from sparse
/// line-of-sight velocity data, and test the isotropy assumption.
#[derive(Parser)]
#[command(version, about, long_about = None)]
struct Args {
    /// Path to a key=value config file (see README for the key reference).
    config: PathBuf,
}

fn main() {
    let args = Args::parse();
    if let Err(e) = phasefit::cli::run_config_file(&args.config) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
