//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the solvers, the linear algebra layer and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Newton iteration for a Legendre-Gauss-Lobatto node did not converge.
    #[error("LGL node {index} did not converge after {iterations} Newton iterations")]
    Quadrature { index: usize, iterations: usize },

    /// Operand shapes are incompatible.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A linear system could not be factored.
    #[error("singular or ill-conditioned matrix (pivot ratio estimate {condition:e})")]
    Singular { condition: f64 },

    /// A rational function was evaluated at one of its poles.
    #[error("pole of the rational approximation hit at partial fraction k = {k}")]
    Pole { k: usize },

    /// Not enough samples to evaluate a convolution quadrature sum.
    #[error("insufficient history: step {step} needs {needed} samples, {available} available")]
    History {
        step: usize,
        needed: usize,
        available: usize,
    },

    /// A dense eigenvalue or block assembly request exceeds the size guard.
    #[error("size guard violated: {0}")]
    SizeGuard(String),

    /// An eigenvalue computation failed.
    #[error("eigensolver failure: {0}")]
    Eigen(String),

    /// Invalid run configuration or invalid parameter.
    #[error("configuration error: {0}")]
    Config(String),

    /// A non-finite value appeared during time stepping.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Input/output failure in the harness.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
