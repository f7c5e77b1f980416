use thiserror::Error;

/// Errors raised by library operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain mismatch: {0} vs {1}")]
    DomainMismatch(String, String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A numerical check (tolerance, residual, doubling test) failed.
    #[error("numerical guard failed: {0}")]
    NumericalGuard(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("infeasible program: {0}")]
    Infeasible(String),
    #[error("sandpile is not recurrent")]
    NotRecurrent,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of numerical guards as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalGuard(_) | Error::NonConvergence(_) | Error::Infeasible(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
