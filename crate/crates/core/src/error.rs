use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimensions or channel counts do not match what an operation requires.
    #[error("input shape error: {0}")]
    InputShape(String),

    /// A value lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation produced NaN or infinity.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("malformed manifest: {0}")]
    MalformedManifest(String),

    #[error("malformed image {path}: {msg}")]
    MalformedImage { path: PathBuf, msg: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("correlation is undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("t statistic is infinite (|r| = 1)")]
    InfiniteStatistic,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// True for numerical failures, as opposed to bad input (files, shapes, formats).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric(_) | Error::InfiniteStatistic | Error::UndefinedCorrelation(_) | Error::Overflow(_)
        )
    }
}
