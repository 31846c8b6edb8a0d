use privseg_lp::LpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad input: malformed grid or market, out-of-range index, unsupported size.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A computation that should succeed on valid input did not.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("linear program: {0}")]
    Lp(#[from] LpError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// `true` for errors caused by the caller's input rather than by the solver.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Invalid(_) => true,
            Error::Lp(LpError::DimensionMismatch { .. } | LpError::NonFinite(_)) => true,
            Error::Numerical(_) | Error::Lp(LpError::IterationLimit(_)) => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
