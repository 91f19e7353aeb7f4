//! Numerical measurement toolkit for parabolic problems on polygonal domains
//! with corner singularities.
//!
//! The crate is organized around a single workflow: solve a linear or
//! semilinear heat-type problem on a polygon with re-entrant corners, expand
//! snapshots in a compactly supported orthonormal wavelet basis, and measure
//! regularity in two competing scales:
//!
//! * the weighted Sobolev (Kondratiev) scale, evaluated by direct quadrature
//!   with distance weights ([`kondratiev`]),
//! * Besov scales read off wavelet coefficient decay, including the
//!   nonlinear-approximation scale that governs adaptive methods ([`besov`]).
//!
//! Supporting modules provide the polygonal geometry and distance weights
//! ([`geometry`]), the wavelet filter bank and fast transforms ([`wavelet`]),
//! operator pencil spectra on wedges with admissible weight-exponent checks
//! ([`pencil`]), uniform-grid finite-difference time stepping ([`parabolic`]),
//! a contraction iteration for power nonlinearities ([`semilinear`]), and
//! report assembly utilities ([`report`]).

pub mod besov;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod kondratiev;
pub mod model;
pub mod parabolic;
pub mod pencil;
pub mod report;
pub mod semilinear;
pub mod wavelet;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
