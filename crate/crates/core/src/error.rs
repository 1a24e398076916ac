use thiserror::Error;

/// Errors raised by constructors, codecs and queries.
#[derive(Debug, Error)]
pub enum SketchError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incompatible sketches: {0}")]
    Incompatible(String),

    #[error("malformed encoding: {0}")]
    Codec(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("every instance failed")]
    AllInstancesFailed,

    #[error("all light-estimator buckets are excluded")]
    NoLightBuckets,

    #[error("estimated state of {bytes} bytes exceeds the {limit} byte budget")]
    StateTooLarge { bytes: u64, limit: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SketchError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SketchError::InvalidParameter(msg.into()))
}
