use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed row: {msg}")]
    MalformedRow { path: PathBuf, line: u64, msg: String },

    #[error("{path}: unexpected header {found:?}, expected {expected:?}")]
    HeaderMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },

    #[error("validation failed for patient {patient_id}: {msg}")]
    Validation { patient_id: u32, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("model file {path}: {msg}")]
    ModelFile { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(patient_id: u32, msg: impl Into<String>) -> Self {
        Error::Validation {
            patient_id,
            msg: msg.into(),
        }
    }
}
