use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("classification mismatch: {0}")]
    Classification(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("cannot bracket level {target} (last upper end {last_hi})")]
    Unbracketable { target: f64, last_hi: f64 },

    #[error("monotonicity violation near s = {at}")]
    NonMonotone { at: f64 },

    #[error("no convergence: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
