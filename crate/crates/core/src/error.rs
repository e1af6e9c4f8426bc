use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input; `offset` is a byte offset for binary formats and a
    /// 1-based line number for text formats.
    #[error("parse error in {what} at {offset}: {message}")]
    Parse {
        what: String,
        offset: usize,
        message: String,
    },

    #[error("unsupported {kind} version: found `{found}`, supported `{supported}`")]
    Version {
        kind: &'static str,
        found: String,
        supported: &'static str,
    },

    #[error("unknown format `{0}`")]
    UnknownFormat(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("not enough data: {0}")]
    Insufficient(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("dangling model reference: {0}")]
    DanglingReference(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by unreadable or malformed inputs, as opposed
    /// to failures of the numeric pipeline itself.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Version { .. }
                | Error::UnknownFormat(_)
                | Error::Config { .. }
        )
    }
}
