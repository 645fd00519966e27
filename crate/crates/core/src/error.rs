use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("embedding index {index} out of range for vocabulary of size {vocab}")]
    Lookup { index: usize, vocab: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("set {index} in batch is empty")]
    EmptySet { index: usize },

    #[error("element {value} outside [0, 1]")]
    Domain { value: f64 },

    #[error("invalid preset: {0}")]
    Preset(String),

    #[error("enumeration of {needed} multisets exceeds budget of {budget}")]
    Budget { needed: u128, budget: u128 },

    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: String },

    #[error("unknown parameter block `{0}`")]
    UnknownBlock(String),

    #[error("{path}: format error at byte {offset}: {msg}")]
    Format {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: unsupported record version {found} (this build reads version {supported})")]
    Version {
        path: PathBuf,
        found: u64,
        supported: u64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {diagnostic}")]
    Diverged {
        epoch: usize,
        batch: usize,
        diagnostic: String,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            offset,
            msg: msg.into(),
        }
    }

    /// True for errors caused by files on disk (missing, unreadable, malformed).
    pub fn is_io_or_format(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Json { .. } | Error::Format { .. } | Error::Version { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
