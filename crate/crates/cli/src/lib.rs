//! Command-line front end for the `field-triple` library: configuration, boundary
//! expressions, command dispatch and CSV/JSON output.

pub mod checks;
pub mod commands;
pub mod config;
pub mod expr;

use config::{Args, RunConfig};
use std::fmt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const THREADS_VAR: &str = "FIELD_TRIPLE_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags, config, expressions or input files.
    Validation(String),
    /// Non-convergence, domain errors and failed checks.
    Numerical(String),
    /// An output could not be written.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<field_triple::Error> for CliError {
    fn from(e: field_triple::Error) -> Self {
        use field_triple::Error::*;
        match e {
            InvalidInput(_) | InvalidParameter(_) | IncompatiblePoints(_) => CliError::Validation(e.to_string()),
            NonFinite { .. } | Domain(_) | InadmissibleCell { .. } | NoConvergence { .. } | SingularJacobian { .. } => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

/// Caps the global worker pool from `FIELD_TRIPLE_THREADS`, if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_VAR}='{raw}' is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(format!("cannot size the thread pool: {e}")))
}

/// Runs the command line: prints the JSON report on stdout and diagnostics on
/// stderr, returning the exit code.
pub fn execute(args: Args) -> i32 {
    let result = configure_threads().and_then(|_| RunConfig::resolve(args)).and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(report) => {
            print!("{}", report.to_json());
            if report.pass {
                EXIT_OK
            } else {
                eprintln!("error: {} did not pass", report.command);
                EXIT_NUMERICAL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
