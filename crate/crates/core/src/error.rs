use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("outside the region where the closed form holds: {0}")]
    OutOfRegion(String),
    #[error("cannot parse theta from {0:?}")]
    ThetaParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

