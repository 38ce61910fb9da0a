use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("matrix is numerically rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("sketch block {block} is rank deficient at column {column}")]
    BlockDeficient { block: usize, column: usize },

    #[error("triangular factor is singular at diagonal entry {index}")]
    Singular { index: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("stream format error: {0}")]
    StreamFormat(String),

    #[error("non-finite value in row {row}, column {col}")]
    Data { row: usize, col: usize },

    #[error("stream yielded no rows")]
    EmptyStream,

    #[error("operation needs a resettable stream: {0}")]
    Capability(String),

    #[error("reference oracle is limited to desk scale: {0}")]
    Scale(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's parameters rather than data or I/O.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Domain(_) | Error::Capability(_) | Error::Scale(_)
        )
    }
}
