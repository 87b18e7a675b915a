//! Unified error type for the numerical library.

use thiserror::Error;

/// Errors produced by construction, evaluation, and solver routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside a function's numerical domain: a negative
    /// `xlogx` input, a non-finite integrand value, an under-resolved
    /// quadrature request, an invalid probability vector, and so on.
    #[error("numerical domain error: {0}")]
    Domain(String),

    /// A point, distribution, or codeword entry violates its amplitude box.
    #[error("amplitude constraint violated: {0}")]
    Infeasible(String),

    /// An iterative procedure exhausted its budget without meeting its
    /// convergence certificate.
    #[error("failed to converge: {0}")]
    NonConvergence(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
