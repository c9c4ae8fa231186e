use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid arity: {0}")]
    InvalidArity(String),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("singular basis: {0}")]
    SingularBasis(String),
    #[error("invalid restriction: {0}")]
    InvalidRestriction(String),
    #[error("invalid index: {0}")]
    InvalidIndex(String),
    #[error("degree underflow: {0}")]
    DegreeUnderflow(String),
    #[error("out of regime: {0}")]
    OutOfRegime(String),
    #[error("undefined conditional: {0}")]
    UndefinedConditional(String),
    #[error("invalid factorization: {0}")]
    InvalidFactorization(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
