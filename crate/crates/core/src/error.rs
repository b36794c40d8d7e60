use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid gradient: {0}")]
    InvalidGradient(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Charging one more step would push the spent budget past its cap.
    #[error(
        "privacy budget exhausted: step {step} would spend {would_spend} {resource}, cap is {cap}"
    )]
    BudgetExhausted {
        resource: &'static str,
        step: u64,
        would_spend: f64,
        cap: f64,
    },

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty vocabulary: no token passed the document-frequency filter")]
    EmptyVocabulary,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
