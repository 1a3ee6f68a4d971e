use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid mask rule: {0}")]
    InvalidRule(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("snapshot format error at offset {offset}: {reason}")]
    Snapshot { offset: usize, reason: String },

    #[error("keyword format error: {0}")]
    KeywordFormat(String),

    #[error("keyword service transport error: {0}")]
    Transport(String),

    #[error("missing environment variable {0}")]
    MissingEnv(&'static str),

    #[error("grouping mismatch: {0}")]
    Grouping(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error after line {last_line_no:?}: {source}")]
    Stream {
        last_line_no: Option<u64>,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
