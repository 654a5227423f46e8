//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building models, diagonalizing,
/// evaluating correlators, or touching the spectrum cache.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or operator dimensions do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// Request exceeds a hard resource cap (e.g. dense matrices past the
    /// largest supported chain length).
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// Argument outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An input violates a structural contract (non-Hermitian Hamiltonian,
    /// operators expressed in different eigenbases, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A closed form was requested whose underlying assumption has not been
    /// verified (or failed verification) for this spectrum.
    #[error("assumption not verified: {0}")]
    AssumptionNotVerified(String),

    /// The model itself is degenerate for the requested quantity
    /// (e.g. a normalization trace is zero).
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    /// LAPACK failure or a result that fails its numerical sanity check.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Not enough data points for a fit or estimate.
    #[error("insufficient data for {context}: need at least {needed}, have {found}")]
    InsufficientData {
        context: &'static str,
        needed: usize,
        found: usize,
    },

    /// Cache file exists but cannot be used (bad magic, version, checksum,
    /// or metadata mismatch). Callers treat this as "recompute".
    #[error("cache format: {0}")]
    CacheFormat(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error indicates a stale or corrupt cache entry rather
    /// than a programming or environment problem.
    pub fn is_cache_miss(&self) -> bool {
        matches!(self, Error::CacheFormat(_))
    }
}
