use crate::numerics::PolarPoint;

/// Errors raised by the verification routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integrand is not finite at {point:?} (value {value})")]
    NonFinite { point: PolarPoint, value: String },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
