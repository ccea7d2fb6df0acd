use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (shape, finiteness, range).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("wrong magic number in {what}: expected {expected:#010x}, found {found:#010x}")]
    WrongMagic {
        what: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("truncated {what}: expected {expected} bytes, found {actual}")]
    Truncated {
        what: String,
        expected: u64,
        actual: u64,
    },

    #[error("item count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid architecture descriptor `{descriptor}`: {reason}")]
    Architecture { descriptor: String, reason: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
