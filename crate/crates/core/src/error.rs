use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the segmentation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("class {0} has zero prior and cannot be scored")]
    ZeroPrior(usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("no disjoint anchor assignment exists for a video of {frames} frames")]
    AnchorsInfeasible { frames: usize },

    #[error("sampling gave up after {0} attempts")]
    SamplingExhausted(usize),

    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(path: &std::path::Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
