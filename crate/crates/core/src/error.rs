use thiserror::Error;

/// Errors produced by model fitting, sampling, and selection routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: {context}")]
    LengthMismatch { context: &'static str },

    #[error("Cholesky factorization failed: {context}")]
    FactorizationFailed { context: &'static str },

    #[error("domain is empty")]
    EmptyDomain,

    #[error("candidate list is empty")]
    EmptyCandidates,

    #[error("query point is not a member of the sample-path grid")]
    OffGridQuery,

    #[error("{kernel} kernel is not supported for {operation}")]
    UnsupportedKernel {
        kernel: &'static str,
        operation: &'static str,
    },

    #[error("{what} exceeds the configured limit of {limit}")]
    TooLarge { what: &'static str, limit: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
