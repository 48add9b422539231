use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// The kernel matrix could not be factorized even at the largest jitter level.
    #[error("ill-conditioned kernel matrix (jitter escalated to {max_jitter:e} without success)")]
    IllConditionedKernel { max_jitter: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed file {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("experiment aborted: {0}")]
    ExperimentAborted(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short stable class name, used for machine-parsable CLI errors.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::DimensionMismatch { .. } => "dimension",
            Error::DegenerateGeometry(_) => "geometry",
            Error::IllConditionedKernel { .. } => "ill-conditioned",
            Error::Numerical(_) => "numerical",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::ExperimentAborted(_) => "experiment",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }
}
