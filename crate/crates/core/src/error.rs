use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent input (bad coefficients, unknown ids, infeasible flows).
    #[error("invalid input: {0}")]
    Input(String),
    /// Parameters outside the region where a formula or cost model is defined.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("solver did not converge after {iterations} iterations (gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },
    #[error("equilibrium not certified: gap {gap:e} exceeds tolerance {tolerance:e}")]
    Uncertified { gap: f64, tolerance: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
