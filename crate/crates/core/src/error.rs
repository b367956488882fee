use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("threshold undefined: {0}")]
    UndefinedThreshold(String),

    #[error("sign undefined: {0}")]
    UndefinedSign(String),

    #[error("algorithm {0} keeps no second-moment state")]
    UnsupportedAlgorithm(String),

    #[error("trajectory diverged at step {step}")]
    Diverged { step: usize },

    #[error("unknown preset `{name}` (known: {known})")]
    UnknownPreset { name: String, known: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for validation problems, 3 for runtime or
    /// numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::InvalidInput(_)
            | Error::InsufficientData(_)
            | Error::UnknownPreset { .. }
            | Error::UnsupportedAlgorithm(_)
            | Error::Parse { .. }
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::NonFinite(_)
            | Error::UndefinedThreshold(_)
            | Error::UndefinedSign(_)
            | Error::Diverged { .. }
            | Error::Io { .. } => 3,
        }
    }
}
