use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the library.
///
/// Variants are grouped by class so that front ends can map each class to a
/// distinct exit status (see [`Error::class`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch at {layer}: {detail}")]
    Shape { layer: String, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {context}{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Parse {
        context: String,
        line: Option<usize>,
        message: String,
    },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed image data: {0}")]
    Format(String),
}

/// Coarse error class used for exit-status mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Parse,
    Io,
    Invariant,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Parse { .. } => ErrorClass::Parse,
            Error::Io { .. } | Error::Format(_) => ErrorClass::Io,
            Error::InvalidInput(_) | Error::Shape { .. } => ErrorClass::Invariant,
        }
    }

    pub(crate) fn shape(layer: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape {
            layer: layer.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
