//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset has {n} images, need at least {min}")]
    DatasetTooSmall { n: usize, min: usize },

    #[error("split fractions sum to {sum}, expected 1")]
    BadFractions { sum: f64 },

    #[error("unsupported image format: {0}")]
    Format(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("duplicate id `{id}`")]
    DuplicateId { id: String },

    #[error("invalid value for id `{id}`: {msg}")]
    InvalidValue { id: String, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown codec `{name}`")]
    UnknownCodec { name: String },

    #[error("codec `{codec}` failed: {msg}")]
    Codec { codec: String, msg: String },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("decompression is not supported for codec `{codec}`")]
    UnsupportedDecompress { codec: String },

    #[error("model hyperparameters differ: {0}")]
    HyperparameterMismatch(String),

    #[error("bad model file: {0}")]
    ModelFormat(String),

    #[error("ids present on only one side; left-only: [{left_only}], right-only: [{right_only}]")]
    IdMismatch {
        left_only: String,
        right_only: String,
    },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("undefined correlation: input has zero variance")]
    ZeroVariance,

    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("missing input files: {0}")]
    MissingFiles(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
