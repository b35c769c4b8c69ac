use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("insufficient precision: {0}")]
    Precision(String),
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
