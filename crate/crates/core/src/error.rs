use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{0} already exists; refusing to overwrite")]
    AlreadyExists(PathBuf),

    #[error("{path} is corrupt: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("{source_name}:{line}: {reason}")]
    Parse {
        source_name: String,
        line: usize,
        reason: String,
    },

    #[error("column range {first}..{end} out of bounds for {n_cols} columns")]
    OutOfRange { first: usize, end: usize, n_cols: usize },

    #[error("matrix {0} was opened read-only")]
    ReadOnly(PathBuf),

    #[error("invalid bed file: {0}")]
    Bed(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Config(String),

    #[error("memory budget exceeded: {what} needs {needed} bytes, budget is {budget} bytes")]
    Capacity { what: String, needed: u64, budget: u64 },

    #[error("eigendecomposition did not converge")]
    NoConvergence,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
