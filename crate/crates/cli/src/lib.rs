//! Experiment drivers behind the `rgsvd` command.

pub mod args;
pub mod config;
pub mod experiments;
pub mod output;
pub mod problem;

use thiserror::Error;

pub use config::{Experiment, ExperimentConfig};
pub use experiments::run_experiment;
pub use output::Row;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("numerical failure: {0}")]
    Numerical(rgsvd::Error),

    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    /// 1 for usage, input and output problems; 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            CliError::Usage(_) | CliError::Output(_) => 1,
        }
    }
}

impl From<rgsvd::Error> for CliError {
    fn from(e: rgsvd::Error) -> Self {
        use rgsvd::Error as E;
        match e {
            E::InvalidConfig(_) | E::DimensionMismatch { .. } | E::ShapeMismatch { .. } | E::Io(_) | E::MatrixMarket(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numerical(other),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

/// Runs `f` on the global pool, or on a single thread when `serial` is set.
pub fn with_threads<R: Send>(serial: bool, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    if !serial {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| CliError::Usage(format!("--serial: {e}")))?;
    Ok(pool.install(f))
}
