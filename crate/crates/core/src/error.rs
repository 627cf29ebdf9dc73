use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("metric not positive at t = {t}, rho = {rho} (eigenvalues {phi}, {psi})")]
    Positivity { t: f64, rho: f64, phi: f64, psi: f64 },
    #[error("non-finite value while evaluating {0}")]
    Evaluation(String),
    #[error("quadrature did not reach tolerance: achieved {achieved:e}, requested {requested:e}")]
    Accuracy { achieved: f64, requested: f64 },
    #[error("extraction failed: {0}")]
    Extraction(String),
    #[error("fit rejected: {0}")]
    Fit(String),
    #[error("solver failure at t = {t}: {reason}")]
    Solver { t: f64, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
