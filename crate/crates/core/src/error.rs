use thiserror::Error;

pub type Result<T, E = TvError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TvError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("invalid dimensions {rows}x{cols}: {reason}")]
    InvalidDimensions {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("expected {expected} channels, found {found}")]
    ChannelCount { expected: usize, found: usize },

    #[error("replicative boundary is only supported with a single direction (got L = {directions})")]
    UnsupportedBoundary { directions: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("filter is identically zero")]
    ZeroFilter,

    #[error("iterate became non-finite at iteration {iteration} (step constant too small?)")]
    Divergence { iteration: usize },

    #[error("linear solver did not reach relative residual {tolerance:e} within {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("reference image has no gradient variance; cannot estimate lambda")]
    ZeroGradient,

    #[error("graymap: {0}")]
    Pnm(#[from] PnmError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PnmError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),

    #[error("truncated payload: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },
}

impl TvError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        TvError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(expected: (usize, usize), found: (usize, usize)) -> Self {
        TvError::ShapeMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        }
    }
}
