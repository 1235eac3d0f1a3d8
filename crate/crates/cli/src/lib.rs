//! `cwta` command-line driver: simulation, power sweeps and cohort analyses.

mod analyze;
mod args;
mod error;
mod manifest;
mod power_cmd;
mod simulate;

use std::path::Path;

pub use args::{Cli, Command};
pub use error::CliError;
pub use manifest::{InputDigest, RunManifest};

use clap::Parser;

/// Parses `argv` and runs the subcommand; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let workers = cli.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    cwta_core::power::with_workers(workers, || match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Power(a) => power_cmd::run(a),
        Command::Analyze(a) => analyze::run(a),
        Command::Calibrate(a) => simulate::calibrate(a),
    })
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub(crate) fn write_file(dir: &Path, name: &str, contents: &str) -> Result<String, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))?;
    Ok(name.to_string())
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("--out {}: {e}", dir.display())))
}

pub(crate) fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// File-name-safe version of a label.
pub(crate) fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
