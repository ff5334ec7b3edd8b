use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid gamma: {0}")]
    InvalidGamma(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid torus: side {0} < 4")]
    TorusTooSmall(usize),
    #[error("event not enabled: {0}")]
    DisabledEvent(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate observable spec: {0}")]
    DegenerateSpec(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no variance: {0}")]
    NoVariance(String),
    #[error("solver failed: {msg} (relative residual {residual:e})")]
    Solver { msg: String, residual: f64 },
    #[error("quadrature accuracy: {0}")]
    Accuracy(String),
    #[error("unreliable exponent: {msg}")]
    UnreliableExponent { msg: String, trace: Vec<f64> },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
