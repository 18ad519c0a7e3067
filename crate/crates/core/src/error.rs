//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error("missing required field `{field}` in {path}")]
    MissingField { path: String, field: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("unknown name `{0}` (not in catalog)")]
    UnknownName(String),

    #[error("model does not fit: {0}")]
    ModelDoesNotFit(String),

    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
