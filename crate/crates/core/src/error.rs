use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which reconstruction stage of a nested aggregator failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NestedLevel {
    /// Reconstruction of a single firm's portfolio from its own moments.
    Inner,
    /// Reconstruction of the rival firms from the outer aggregate.
    Outer,
}

impl std::fmt::Display for NestedLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NestedLevel::Inner => f.write_str("inner"),
            NestedLevel::Outer => f.write_str("outer"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("integer overflow computing {0}")]
    Overflow(String),

    #[error("non-finite value in input")]
    NonFinite,

    #[error("polynomial has non-real roots (imaginary part {max_imag:e})")]
    NonRealRoots { max_imag: f64 },

    #[error("polynomial has a negative root {value:e}")]
    NegativeRoot { value: f64 },

    #[error("reconstruction failed after {retries} retries (residual {residual:e}): {reason}")]
    ReconstructionFailed {
        residual: f64,
        retries: usize,
        reason: String,
    },

    #[error("{level} reconstruction failed: {source}")]
    Nested {
        level: NestedLevel,
        #[source]
        source: Box<Error>,
    },

    #[error("solver did not converge in {iterations} iterations (last residual {:e})", residual_trace.last().copied().unwrap_or(f64::NAN))]
    NotConverged {
        iterations: usize,
        residual_trace: Vec<f64>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Numerical failures (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonRealRoots { .. }
            | Error::NegativeRoot { .. }
            | Error::ReconstructionFailed { .. }
            | Error::NotConverged { .. } => true,
            Error::Nested { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
