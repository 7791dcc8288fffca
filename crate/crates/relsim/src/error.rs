//! Error type shared across the crate.
//!
//! Variants are grouped by how the CLI maps them to exit codes: usage
//! problems (bad flags, bad config keys), data problems (malformed input,
//! violated preconditions), and numerical problems (non-convergence,
//! non-finite values, undefined metrics).

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad command line or config-file usage.
    #[error("usage: {0}")]
    Usage(String),

    /// Malformed or inconsistent input data, including precondition
    /// violations detected while reading files.
    #[error("{0}")]
    Data(String),

    /// Malformed input tied to a specific file location.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    /// An iterative routine failed to converge within its budget.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A non-finite value appeared where a finite one is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A metric is undefined for the given inputs (e.g. a single-class
    /// cohort has no precision-recall curve).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Exit code the CLI reports for this error: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Data(_) | Error::Parse { .. } | Error::Io { .. } => 2,
            Error::NoConvergence(_) | Error::NonFinite(_) | Error::UndefinedMetric(_) => 3,
        }
    }
}
