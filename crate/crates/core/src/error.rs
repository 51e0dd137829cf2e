use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or incompatible shapes. `path` names the offending
    /// config key or component.
    #[error("configuration error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    /// An API was used out of contract (stale cache, malformed action, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Prefixes training/numerical errors with loop context.
    pub fn with_context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Training(m) => Error::Training(format!("{ctx}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{ctx}: {m}")),
            other => other,
        }
    }

    /// True for errors caused by the caller's configuration rather than by a run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Format { .. })
    }
}
