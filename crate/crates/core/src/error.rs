use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, NaedError>;

/// Source location of a parse failure, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error)]
pub enum NaedError {
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("index {index} out of range for {len} qubits")]
    Index { index: usize, len: usize },
    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl NaedError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        NaedError::Validation(msg.into())
    }

    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        NaedError::Parse {
            location: Location { line, column },
            message: message.into(),
        }
    }

    /// True for errors caused by the caller's input rather than the environment.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, NaedError::Io(_))
    }
}
