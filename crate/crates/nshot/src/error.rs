//! Crate-wide error type for validated constructors and checked operations.

use thiserror::Error;

/// Errors produced by validated constructors and checked operations.
///
/// Numerical routines themselves are total on their validated inputs; every
/// domain restriction is enforced up front and reported through this type.
#[derive(Debug, Clone, PartialEq, Error)]
#[non_exhaustive]
pub enum Error {
    /// A probability vector failed validation (negative entry, wrong sum,
    /// fewer than two outcomes).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// An outcome-count vector failed validation.
    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    /// An angle or angle interval lies outside `[0, pi/2]` or is empty.
    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    /// A domain on the unit sphere failed validation.
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    /// A scalar or structural argument is outside its documented domain.
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument {
        /// Name of the offending parameter.
        name: &'static str,
        /// Human-readable description of the violation.
        reason: String,
    },

    /// Two objects that must agree on a dimension do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An ensemble failed validation (weights, duplicates, emptiness).
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    /// The exact outcome lattice C(n+N-1, N-1) is too large to enumerate
    /// in memory; exact computations refuse rather than silently truncate.
    #[error("outcome lattice has {size} points, above the exact-computation guard of {limit}")]
    OutcomeSpaceTooLarge {
        /// Number of outcome lattice points the request would require.
        size: u128,
        /// The configured guard.
        limit: u64,
    },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
