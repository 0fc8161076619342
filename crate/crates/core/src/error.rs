use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite entry at position {0}")]
    NonFinite(usize),

    #[error("operation is undefined for the zero vector")]
    ZeroVector,

    #[error("matrix has no non-zero rows")]
    ZeroMatrix,

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid shift {shift}: {detail}")]
    InvalidShift { shift: f64, detail: String },

    #[error("shifted operator needs an estimate of the top eigenvalue")]
    MissingEigenvalueEstimate,

    #[error("vector is orthogonal to the top eigenvector; potential is unbounded")]
    OrthogonalToTopEigenvector,

    #[error("quadratic form is not positive ({0})")]
    NonPositiveQuadraticForm(f64),

    #[error("block power iterate lost rank")]
    RankDeficientBlock,

    #[error("eigengap too small: shift search did not terminate within {iterations} iterations")]
    GapTooSmall { iterations: usize },

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid matrix structure: {0}")]
    InvalidStructure(String),

    #[error("sample stream exhausted after {0} samples")]
    StreamExhausted(u64),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
