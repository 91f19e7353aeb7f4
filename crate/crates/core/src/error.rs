//! Error type shared across the crate.
//!
//! Variants mirror the failure modes that callers are expected to branch on:
//! invalid parameters, geometry membership violations, grid/level mismatches,
//! iterative-solver diagnostics, and diverging iterations. Everything carries
//! a human-readable context string; tests match on the variant.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar or structural parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A point was required to lie in the closed domain but does not.
    #[error("point ({x}, {y}) lies outside the closed domain")]
    OutsideDomain { x: f64, y: f64 },

    /// An index (vertex, coefficient, snapshot) is out of range.
    #[error("index {index} out of range: {context}")]
    IndexOutOfRange { index: usize, context: String },

    /// Sample arrays or grids have an unusable shape (non-dyadic spacing,
    /// mismatched lengths, empty input).
    #[error("bad shape: {0}")]
    Shape(String),

    /// A requested transform or reconstruction level is incompatible with the
    /// available grid resolution.
    #[error("level error: {0}")]
    Level(String),

    /// Not enough data points for a fit or an estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A ratio such as a product-norm quotient is undefined (zero denominator
    /// or a divergent factor).
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    /// Input that must be sorted (time stamps, curve abscissae) is not.
    #[error("unsorted input: {0}")]
    Unsorted(String),

    /// Coefficient data fails the uniform ellipticity check.
    #[error("ellipticity violation: {0}")]
    Ellipticity(String),

    /// An iterative linear solver stagnated or hit its iteration cap.
    #[error("linear solver diagnostic: {0}")]
    Solver(String),

    /// A fixed-point iteration diverged (monotonically growing step norms).
    #[error("iteration diverged after {iterations} steps: {context}")]
    Diverged { iterations: usize, context: String },

    /// A root search or eigenvalue count could not be resolved to the
    /// requested certainty.
    #[error("unresolved numerical search: {0}")]
    Unresolved(String),

    /// A required upstream artifact (file, snapshot set) is missing.
    #[error("missing dependency: {0}")]
    Dependency(String),

    /// Configuration file problems: unreadable, unparsable, or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
