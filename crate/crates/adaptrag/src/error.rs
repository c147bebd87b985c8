use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the std layer, grouped by CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Data { path: PathBuf, line: usize, message: String },
    #[error("{}: schema mismatch: {message}", path.display())]
    SchemaMismatch { path: PathBuf, message: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

impl Error {
    /// 1 usage/config, 2 data, 3 backend.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Io { .. } | Error::Data { .. } | Error::SchemaMismatch { .. } | Error::Invalid(_) => 2,
            Error::Backend(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
