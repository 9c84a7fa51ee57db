use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model has `s = 0`, which has no finite (p, r) parameterization.
    #[error("degenerate model: trsd = 0 has no (p, r) form, use the Poisson path")]
    DegenerateModel,

    /// The requested construction is not defined for these parameters,
    /// e.g. a pivot limit with `l^2 s^2 >= 1`.
    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    /// An iterative method hit its iteration cap.
    #[error("no convergence in {routine} after {iterations} iterations")]
    NoConvergence {
        routine: &'static str,
        iterations: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
