use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bit width must be odd so the majority bit is defined, got {0}")]
    EvenBitWidth(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("{requested} distinct {bits}-bit patterns requested but only {available} exist")]
    InsufficientPatterns {
        requested: usize,
        bits: usize,
        available: u128,
    },

    #[error("instance list is empty")]
    EmptyInstances,

    #[error("ridge fit needs at least one (feature, target) pair")]
    EmptyFit,

    #[error("ridge penalty must be positive, got {0}")]
    NonPositiveLambda(f64),

    #[error("exhaustive sampling supports at most 24 variables, got {0}")]
    StateSpaceTooLarge(usize),

    #[error("all 2^{0} selections have already been accepted")]
    SearchSpaceExhausted(usize),

    #[error("the `{0}` sampler has no implementation in this build")]
    UnimplementedSampler(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
