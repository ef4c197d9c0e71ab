use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("SVD did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt model container: {0}")]
    Format(String),

    #[error("{path}: bad IDX magic number 0x{found:08x} (expected 0x{expected:08x})")]
    IdxMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path}: truncated IDX file ({actual} bytes, expected {expected})")]
    IdxTruncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("IDX count mismatch: {images} images but {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("trajectory too short: {0}")]
    TooFewEvents(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 IO, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) | Error::Precondition(_) | Error::Serde(_) => 2,
            Error::Io { .. }
            | Error::Format(_)
            | Error::IdxMagic { .. }
            | Error::IdxTruncated { .. }
            | Error::IdxCountMismatch { .. }
            | Error::EmptyDataset
            | Error::TooFewEvents(_) => 3,
            Error::NoConvergence { .. } | Error::NonFinite(_) => 4,
        }
    }
}
