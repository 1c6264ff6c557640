use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Sequential thinning is only a good approximation at low phase-space density.
    #[error(
        "rate * coherence time = {density:.4} exceeds {limit}; thinning approximation invalid"
    )]
    DensityTooHigh { density: f64, limit: f64 },

    #[error("stream `{stream}` is not sorted at index {index}")]
    Unsorted { stream: &'static str, index: usize },

    #[error("offset {offset:e} s lies inside the correlation range (needs > {required:e} s)")]
    OffsetInsideCorrelation { offset: f64, required: f64 },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("malformed event file: {0}")]
    EventFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, value, "must be finite and > 0"))
    }
}
