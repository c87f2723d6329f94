//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A kernel specification violates its invariants (e.g. a non-positive
    /// lengthscale component).
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    /// Cholesky factorization failed even after escalating diagonal jitter.
    /// `tried` lists the jitter levels that were attempted.
    #[error("cholesky factorization failed after jitter levels {tried:?}")]
    Cholesky { tried: Vec<f64> },

    /// An operation needs more observations than are available.
    #[error("insufficient data: need {needed}, have {have}")]
    InsufficientData { needed: usize, have: usize },

    /// A caller-supplied argument is out of range or inconsistent.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A run or schedule configuration is unusable.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A data table could not be ingested. `row` is 1-based and counts the
    /// header as row 1.
    #[error("ingestion error at {path:?} row {row}: {message}")]
    Ingest {
        path: PathBuf,
        row: usize,
        message: String,
    },

    /// An objective returned a non-finite value where a finite one is
    /// required (e.g. at an optimizer's starting point).
    #[error("non-finite objective value: {0}")]
    NonFinite(String),

    #[error("io error on {path:?}: {source}")]
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
}

pub type Result<T> = std::result::Result<T, Error>;
