use thiserror::Error;

/// Failures reported by the cone kernels and the checks built on them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{what} did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence { what: &'static str, iters: usize, residual: f64 },
    #[error("ill-conditioned computation: {0}")]
    IllConditioned(String),
}

pub type Result<T> = std::result::Result<T, Error>;
