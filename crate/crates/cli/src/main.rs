mod args;
mod run;
mod selftest;

use args::Cli;
use clap::error::ErrorKind;
use clap::Parser;
use std::process::ExitCode;

/// Failures that end a run: bad flags (exit 1) or a numerical error from
/// the library (exit 2).
#[derive(Debug)]
pub enum Failure {
    Usage { flag: String, msg: String },
    Numeric(biflab_core::Error),
    /// A qualitative check did not hold (selftest).
    Check(String),
}

impl From<biflab_core::Error> for Failure {
    fn from(e: biflab_core::Error) -> Self {
        Failure::Numeric(e)
    }
}

pub fn usage(flag: &str, msg: impl Into<String>) -> Failure {
    Failure::Usage { flag: flag.into(), msg: msg.into() }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("BIFLAB_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| usage("BIFLAB_THREADS", format!("expected a thread count, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage("BIFLAB_THREADS", e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = configure_threads().and_then(|_| run::dispatch(cli.command, None));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage { flag, msg }) => {
            eprintln!("error: invalid value for {flag}: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("error: SelftestFailed: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(2)
        }
    }
}
