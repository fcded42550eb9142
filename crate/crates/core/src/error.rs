use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix shape {rows}x{cols} needs {} entries, got {len}", rows * cols)]
    ShapeMismatch { rows: usize, cols: usize, len: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (failing pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    /// Gram-matrix Cholesky broke down inside a weighted QR, or a sketch has
    /// fewer numerically independent directions than requested.
    #[error("rank deficiency at column {column} ({stage})")]
    RankDeficient { column: usize, stage: String },

    #[error("sketch assumption violated: rank of V_kᵀTΩ is {rank}, need {k}")]
    AssumptionViolated { rank: usize, k: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("reference oracle refuses a {rows}x{cols} problem (limit {limit})")]
    OracleTooLarge { rows: usize, cols: usize, limit: usize },

    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attaches a stage label to rank-deficiency errors; other errors pass through.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        match self {
            Error::RankDeficient { column, stage: inner } => Error::RankDeficient {
                column,
                stage: format!("{}: {inner}", stage.into()),
            },
            other => other,
        }
    }
}
