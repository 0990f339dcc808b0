use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate fit: Gram matrix condition estimate {condition:e} exceeds {limit:e}")]
    FitDegenerate { condition: f64, limit: f64 },
    #[error("input error: {0}")]
    Input(String),
    #[error("coefficient record: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
