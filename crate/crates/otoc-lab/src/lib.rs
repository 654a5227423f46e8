//! Late-time out-of-time-ordered correlators (OTOCs) of finite spin chains.
//!
//! The crate builds a periodic spin-1/2 chain Hamiltonian from Pauli strings,
//! diagonalizes it exactly, and evaluates the infinite-time average of
//! `<A B(t) C D(t)>` by three independent routes:
//!
//! - direct Monte Carlo sampling of the time integral,
//! - the closed form valid for spectra with no nontrivial additive
//!   resonances `E_p + E_r = E_q + E_s`,
//! - the per-eigenstate formula built from diagonal matrix elements.
//!
//! On top of those sit diagnostics for the assumptions behind the closed
//! forms (spectrum genericity, eigenstate-thermalization structure,
//! microcanonical leakage), a Haar-random-unitary baseline, and a scaling
//! harness that sweeps system sizes and fits power laws to the results.

// Link the system BLAS/LAPACK provider.
use openblas_src as _;

pub mod cache;
pub mod error;
pub mod eth;
pub mod haar;
pub mod linalg;
pub mod operators;
pub mod otoc;
pub mod par;
pub mod record;
pub mod scaling;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Crate version embedded in output artifacts.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
