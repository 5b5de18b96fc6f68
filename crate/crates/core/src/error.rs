use thiserror::Error;

/// Errors produced by the library routes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mode frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),

    #[error("bath modes are not identical (mode {index} differs from mode 0)")]
    NonIdenticalBath { index: usize },

    #[error("bath has no modes")]
    EmptyBath,

    #[error("nonlinearity mu = 0: Ehrenfest and revival times are undefined")]
    DegenerateNonlinearity,

    #[error("sample batch is empty")]
    EmptyBatch,

    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),

    #[error("dimension mismatch: expected {expected} environment modes, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("evaluation grid is empty")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, Error>;
