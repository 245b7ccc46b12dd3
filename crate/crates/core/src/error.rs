use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the hologram pipeline.
///
/// Variants are grouped by category so front ends can map them to distinct
/// exit codes (see [`CghError::category`]).
#[derive(Debug, Error)]
pub enum CghError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scene: {0}")]
    Scene(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid scene parameters: {0}")]
    Params(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("duplicate sample id `{0}`")]
    DuplicateSample(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error class, stable across releases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Numeric,
    Config,
    Input,
    Format,
    Io,
}

impl CghError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            CghError::Dimension(_)
            | CghError::Domain(_)
            | CghError::Index(_)
            | CghError::State(_) => ErrorCategory::Numeric,
            CghError::Config(_) | CghError::Params(_) => ErrorCategory::Config,
            CghError::Scene(_) | CghError::DuplicateSample(_) => ErrorCategory::Input,
            CghError::Format { .. } | CghError::Validation(_) => ErrorCategory::Format,
            CghError::Io { .. } => ErrorCategory::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CghError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        CghError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CghError>;
