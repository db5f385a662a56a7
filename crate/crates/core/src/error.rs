use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("amplitude budget exceeded: {needed} > {budget}")]
    Budget { needed: u128, budget: u128 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("internal consistency error: {0}")]
    Consistency(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("search failed: {0}")]
    SearchFailed(String),
    #[error("protocol failure: {0}")]
    ProtocolFailure(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
