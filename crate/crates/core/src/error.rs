use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("duplicate column `{name}` (positions {first} and {second})")]
    DuplicateColumn { name: String, first: usize, second: usize },

    /// `row` is the 1-based data row, not counting the header.
    #[error("row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("input contains no data rows")]
    Empty,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("malformed model file: {0}")]
    Format(String),

    #[error("model format version {found} is newer than supported version {supported}")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("objective became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("search space of {0} subset pairs exceeds the brute-force limit")]
    SpaceTooLarge(u128),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    /// True for errors caused by bad user input rather than a failure while working.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NonFinite { .. } | Error::SpaceTooLarge(_))
    }
}
