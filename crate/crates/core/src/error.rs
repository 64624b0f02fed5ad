use thiserror::Error;

/// Errors raised by the simulation model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate constellation: points {first} and {second} coincide")]
    DegenerateConstellation { first: usize, second: usize },

    #[error("overlap matrix has eigenvalue {value:e} below the clamp threshold")]
    ConventionInconsistency { value: f64 },

    #[error("eigenvalue solver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
