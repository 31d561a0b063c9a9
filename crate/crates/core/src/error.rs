//! Error types shared by every module of the library.

use thiserror::Error;

/// Library-wide error type.
///
/// Variants are grouped by how callers are expected to react:
/// [`Error::InvalidArgument`] and [`Error::Parse`] indicate misuse of the API
/// or malformed input files; the matrix-shape and numeric-domain variants
/// indicate data that is numerically outside an operation's domain; and
/// [`Error::ContractViolation`] indicates that a constructor verified its own
/// output against a documented contract and the verification failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max deviation {deviation:.3e}, tolerance {tolerance:.3e})")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("trace is {trace:.12} but must be 1 (tolerance {tolerance:.3e})")]
    InvalidTrace { trace: f64, tolerance: f64 },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {eigenvalue:.3e})")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric domain error: {0}")]
    Domain(String),

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("unsupported reduction: {0}")]
    UnsupportedReduction(String),

    #[error("contract verification failed: {what}\n{diagnostics}")]
    ContractViolation { what: String, diagnostics: String },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
