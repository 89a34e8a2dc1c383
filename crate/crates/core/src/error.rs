use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("non-finite or negative value for {0}")]
    InvalidValue(&'static str),

    #[error("normalized Doppler {0} is outside [0, 0.5)")]
    DopplerOutOfRange(f64),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("the LOS equalizer needs a channel without NLOS terms")]
    NotLineOfSight,

    #[error("the Rician equalizer needs a finite K factor")]
    InfiniteK,

    #[error("dense materialization of a {0}-row matrix exceeds the size guard")]
    TooLarge(usize),

    #[error("no root of the variance-to-expectation equation in K ∈ [1, 1e12]")]
    Unbounded,
}
