//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid state: {0}")]
    State(String),

    /// Malformed dataset content; carries the file and 1-based line number.
    #[error("data error at {path}:{line}: {msg}")]
    Data {
        path: String,
        line: usize,
        msg: String,
    },

    /// Malformed serialized artifact (checkpoint, config, results file).
    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit code for this error: 2 for data/config problems, 3 for
    /// runtime failures. Usage errors (exit 1) are handled by the parser.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Conflict(_)
            | Error::NotFound(_)
            | Error::Data { .. }
            | Error::Format(_)
            | Error::Config(_) => 2,
            Error::State(_) | Error::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
