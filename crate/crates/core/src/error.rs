use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("PGM payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid JSON document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("empty data set")]
    EmptyData,
    #[error("all pole forces are zero; phase is degenerate")]
    DegeneratePhase,
    #[error("pattern spectrum undefined for an empty image")]
    UndefinedSpectrum,
    #[error("kappa undefined: chance agreement equals 1")]
    UndefinedKappa,
    #[error("fluid-matter ratio undefined: matter volume is zero")]
    UndefinedRatio,
    #[error("degenerate statistic: {0}")]
    Degenerate(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("no mapping for label {0}")]
    MissingMapping(u32),
    #[error("training set has no samples for class {0}")]
    EmptyClass(usize),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse category used by front ends to pick an exit status.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. }
            | Error::Json(_)
            | Error::InvalidParameter(_)
            | Error::MissingMapping(_) => ErrorCategory::Config,
            Error::Diverged(_) | Error::DegeneratePhase => ErrorCategory::Convergence,
            _ => ErrorCategory::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Convergence,
}

pub type Result<T> = std::result::Result<T, Error>;
