use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An exhaustive search would exceed its hard work limit.
    #[error("enumeration budget exceeded for {what}: {needed} > {limit}")]
    Budget {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("defender oracle gave up after {trials} trials (best estimated R = {best:.6})")]
    SolverFailure { trials: usize, best: f64 },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
