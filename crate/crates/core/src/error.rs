use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two distributions were compared over different label sets.
    #[error("label sets differ: {left:?} vs {right:?}")]
    LabelMismatch {
        left: Vec<String>,
        right: Vec<String>,
    },

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("events from more than one umwelt: expected `{expected}`, found `{found}`")]
    MixedUmwelts { expected: String, found: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("maze parse error at line {line}: {message}")]
    MazeParse { line: usize, message: String },

    #[error("{path}: line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: column `{column}` has no values")]
    EmptyColumn { path: PathBuf, column: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("training diverged for model {model} (loss is not finite)")]
    Divergence { model: usize },

    #[error("compression failed: {0}")]
    Compression(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
