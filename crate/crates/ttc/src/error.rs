use thiserror::Error;

/// Errors produced by tensor construction, augmentation, solvers and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument does not hold (bad mode index,
    /// mismatched shapes, out-of-range rates or ranks, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested operation does not support the input shape
    /// (e.g. ket augmentation on non-power-of-two extents).
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    /// A file or byte stream does not conform to its format.
    #[error("malformed input: {0}")]
    MalformedInput(String),

    /// Every mode carried zero weight at some missing position, so the
    /// aggregation step has nothing to average.
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-parseable code for CLI error reporting.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::UnsupportedShape(_) => "unsupported-shape",
            Error::MalformedInput(_) => "malformed-input",
            Error::DegenerateWeights(_) => "degenerate-weights",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
