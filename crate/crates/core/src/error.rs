use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} must be a power of two and at least 8")]
    InvalidGrid(usize),

    #[error("grid mismatch: expected n = {expected}, found n = {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("field must be mean-zero, found mean {0:e}")]
    NonZeroMean(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite velocity at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },

    #[error("time {t} outside sampled velocity history [{start}, {end}]")]
    OutsideHistory { t: f64, start: f64, end: f64 },

    #[error("modulus queried at h = {h} outside table range [0, {max}]")]
    OutsideModulusTable { h: f64, max: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
