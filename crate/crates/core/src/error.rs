use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the geometry and pipeline stages.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point depth must be positive, got Z = {0}")]
    NonPositiveDepth(f64),
    #[error("pose trajectory is empty")]
    EmptyTrajectory,
    #[error("pose trajectory timestamps must be strictly increasing (index {0})")]
    UnorderedTrajectory(usize),
    #[error("sparse cloud has no entries")]
    EmptySparseCloud,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("region does not intersect the image")]
    EmptyRegion,
    #[error("fewer than two foreground pixels with valid metric points ({0})")]
    InsufficientForeground(usize),
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("invalid scene spec: {0}")]
    SpecInvalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while reading or writing a frame bundle directory.
#[derive(Debug, Error)]
pub enum BundleError {
    #[error("missing bundle file `{0}`")]
    MissingFile(String),
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("invariant violated for `{field}`: {reason}")]
    InvariantViolation { field: String, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BundleError {
    pub(crate) fn parse(file: &str, line: usize, message: impl Into<String>) -> Self {
        BundleError::Parse {
            file: file.to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invariant(field: &str, reason: impl Into<String>) -> Self {
        BundleError::InvariantViolation {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

impl Error {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
