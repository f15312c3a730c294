use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    /// A summand or family value was +inf where a finite value is required.
    #[error("summand overflow: psi is infinite at q = {q}")]
    Overflow { q: u64 },

    #[error("undefined ratio: denominator sum is zero")]
    UndefinedRatio,

    #[error("undefined bound: pair double sum is zero")]
    UndefinedBound,

    #[error("resource budget exceeded for {what}: need {needed}, budget {budget}")]
    Resource {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    /// Adaptive integration gave up; `low..=high` still brackets the true value.
    #[error("no convergence to tol {tol:e}: best bracket [{low}, {high}]")]
    ConvergenceFailure { low: f64, high: f64, tol: f64 },

    #[error("unknown atom index {0}")]
    UnknownAtom(usize),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
