use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure at step {step} (t = {t:.4} years): {detail}")]
    Numerical { step: usize, t: f64, detail: String },

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: line {line}: {detail}")]
    Load {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad input data rather than bad usage or arithmetic.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Load { .. } | Error::Io { .. } | Error::Domain(_) => true,
            Error::Replicate { source, .. } => source.is_data_error(),
            _ => false,
        }
    }

    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical { .. } => true,
            Error::Replicate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
