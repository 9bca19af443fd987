use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a shape or value precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix is not positive definite after jitter schedule {jitter_history:?}")]
    Factorization { jitter_history: Vec<f64> },

    #[error("all {restarts} restarts failed to fit; jitter tried: {jitter_history:?}")]
    Fitting { restarts: usize, jitter_history: Vec<f64> },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("budget allocation error: {0}")]
    Allocation(String),

    #[error("reporting error: {0}")]
    Reporting(String),

    #[error("unknown benchmark problem `{0}`")]
    UnknownProblem(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
