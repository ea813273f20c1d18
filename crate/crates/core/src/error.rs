//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file content. `line` is 1-based (line, row or feature
    /// number depending on the format).
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid geometry ({context}): {message}")]
    InvalidGeometry { context: String, message: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("graph construction: {0}")]
    InvalidGraph(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("rasters misaligned: {0}")]
    Misaligned(String),

    #[error("operation {operation} does not apply to component {kind}")]
    UnsupportedKind {
        kind: &'static str,
        operation: &'static str,
    },

    #[error("degenerate statistics: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
