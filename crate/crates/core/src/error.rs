use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid hyper-parameters (τ, γ, bandwidth, temperatures, ...).
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Inputs with inconsistent shapes or contents.
    #[error("invalid input: {0}")]
    Usage(String),
    /// Support enumeration refused because the problem is too wide.
    #[error(
        "{covariates} covariates exceed the exhaustive limit of {limit}; use the Gumbel solver"
    )]
    TooManyCovariates { covariates: usize, limit: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Optimisation produced a non-finite objective.
    #[error("solver diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },
}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
