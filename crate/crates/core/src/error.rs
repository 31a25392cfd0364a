use thiserror::Error;

use crate::oracle::Capability;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("vector is empty")]
    EmptyVector,
    #[error("zero vector has no sampling distribution")]
    ZeroVector,
    #[error("capability {0:?} is not available on this handle")]
    CapabilityMissing(Capability),
    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: u64, len: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("malformed instance: {0}")]
    MalformedInstance(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix is not a valid density operator: {0}")]
    InvalidDensityOperator(String),
    #[error("bound violation: {0}")]
    BoundViolation(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors that indicate a violated mathematical bound rather
    /// than bad input.
    pub fn is_violation(&self) -> bool {
        matches!(self, Error::BoundViolation(_))
    }
}
