use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the radblock pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("object {id} outside unambiguous region: {reason}")]
    Ambiguity { id: u32, reason: String },

    #[error("scenario generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    #[error("{axis} bin {bin} out of range (axis has {len} bins)")]
    BinOutOfRange {
        axis: &'static str,
        bin: usize,
        len: usize,
    },

    #[error("measurement model is singular at the origin")]
    OriginSingularity,

    #[error("innovation covariance not invertible (min eigenvalue {min_eigenvalue:e}, condition {condition:e})")]
    SingularInnovation { min_eigenvalue: f64, condition: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("too few sequences to split: {0} (need at least 10)")]
    TooFewSequences(usize),

    #[error("{0}")]
    Data(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
