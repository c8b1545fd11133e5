use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("data generation failed after {attempts} attempts: {reason}")]
    GenerationFailure { attempts: usize, reason: String },

    #[error("anomalous class of the sampled pool is empty")]
    StructuralClassEmpty,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("support set is empty")]
    EmptyContext,

    #[error("invalid label {value} at row {row}: {expected}")]
    LabelDomain { row: usize, value: i64, expected: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite loss at step {step} (task seed {task_seed})")]
    NonFiniteLoss { step: u64, task_seed: u64 },

    #[error("format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checksum mismatch for {}", path.display())]
    ChecksumMismatch { path: PathBuf },

    #[error("malformed file {}: {reason}", path.display())]
    Malformed { path: PathBuf, reason: String },

    #[error("io error on {}: {source}", path.display())]
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
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    /// Whether the failure is a property of the data or configuration
    /// rather than the environment.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Csv(e) => return !e.is_io_error(),
            Error::Json(e) => return !e.is_io(),
            _ => {}
        }
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::LabelDomain { .. }
                | Error::InvalidConfig(_)
                | Error::InvalidInput(_)
                | Error::VersionMismatch { .. }
                | Error::ChecksumMismatch { .. }
                | Error::Malformed { .. }
                | Error::EmptyContext
        )
    }
}
