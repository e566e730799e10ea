use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("observation {index} lies on the diagonal (equal standardized components)")]
    DiagonalInput { index: usize },

    #[error("numeric range error: {0}")]
    NumericRange(String),

    #[error("series did not converge within {terms} terms")]
    NonConvergence { terms: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{failed} of {total} replications failed (limit {limit})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit: usize,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end: 2 usage, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParams(_) => 2,
            Error::DiagonalInput { .. }
            | Error::Io { .. }
            | Error::Schema(_)
            | Error::Parse { .. } => 3,
            Error::Domain(_)
            | Error::NumericRange(_)
            | Error::NonConvergence { .. }
            | Error::TooManyFailures { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
