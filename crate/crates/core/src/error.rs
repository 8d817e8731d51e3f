use nalgebra::DMatrix;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid data at row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate statistics: {0}")]
    Degenerate(String),

    /// Covariance completion ran out of sweeps. `best` is the last iterate.
    #[error("covariance completion did not converge after {iterations} sweeps (residual {residual:e})")]
    CompletionNotConverged {
        iterations: usize,
        residual: f64,
        best: Box<DMatrix<f64>>,
    },

    #[error("model selection failed: {0}")]
    Selection(String),

    #[error("source exhausted at trial {trial}: {reason}")]
    SourceExhausted { trial: usize, reason: String },

    #[error("unknown {kind} '{name}'")]
    UnknownStrategy { kind: &'static str, name: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn mismatch(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }
}
