use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input value violates an operation precondition.
    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// A pixel region holds no valid depth samples.
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    /// Eye and gaze target coincide, so no direction exists.
    #[error("degenerate gaze: {0}")]
    DegenerateGaze(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The metric is not defined for this input (e.g. single-class ground truth).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: merge conflict: {message}")]
    MergeConflict { line: u64, message: String },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("bad weight bundle: {0}")]
    Weights(String),

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

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
