//! Shared error type for the crate.

use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// Each variant corresponds to one failure category so that callers (the CLI
/// in particular) can map errors to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Tensor or vector dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Invalid configuration (empty dataset, degenerate region, bad flag value...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed or out-of-range input data.
    #[error("invalid data: {0}")]
    Data(String),

    /// Checkpoint file does not match the documented format.
    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    /// Category or photographer vocabularies do not line up.
    #[error("vocabulary mismatch: {0}")]
    Vocabulary(String),

    /// Training produced a non-finite value and was aborted.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// Stable one-token category used in machine-parseable error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Shape(_) => "shape",
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Checkpoint(_) => "checkpoint",
            Error::Vocabulary(_) => "vocab",
            Error::Numeric(_) => "numeric",
        }
    }

    /// Convenience constructor tagging an io::Error with its path.
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
