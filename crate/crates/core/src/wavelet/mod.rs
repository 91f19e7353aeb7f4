//! Compactly supported orthonormal wavelet systems and fast transforms.
//!
//! The systems shipped here are the classical orthonormal families with
//! extremal phase: the piecewise-constant system (order 1) and the two
//! shortest smooth families (orders 2 and 3). Filters are generated from
//! closed-form radical expressions and validated against the defining
//! identities: the low-pass taps sum to `√2` and even shifts are orthonormal.
//!
//! Transforms operate on the integer lattice with zero extension: samples on
//! a uniform dyadic grid over a bounding box are treated as a finitely
//! supported sequence, so every pyramid step is an exact isometry and the
//! full decomposition conserves energy to rounding accuracy.
//!
//! Submodules:
//! * [`transform`]: dyadic cubes, coefficient containers, forward/inverse
//!   pyramid transforms in one and two dimensions, CSV round-trips.
//! * [`cascade`]: pointwise evaluation of the generator and wavelet at dyadic
//!   points via the refinement relation, plus exact polynomial moments.

pub mod cascade;
pub mod transform;

pub use cascade::{scaling_moments, wavelet_moment, DyadicValues};
pub use transform::{
    forward_1d, forward_2d, inverse_1d, inverse_2d, read_coefficients_csv,
    write_coefficients_csv, Band, DyadicCube, EntryId, GridSamples1, GridSamples2,
    WaveletCoefficients,
};

use crate::error::Error;
use crate::Result;

/// Tolerance for the filter identities (tap sum and shift orthonormality).
pub const FILTER_IDENTITY_TOL: f64 = 1e-12;

/// An orthonormal wavelet system given by its low-pass filter.
///
/// The generator satisfies the two-scale relation with taps `h[0..L]` and has
/// support `[0, L-1]`; the wavelet uses the mirrored high-pass taps. `order`
/// is the number of vanishing moments of the wavelet.
#[derive(Debug, Clone)]
pub struct WaveletSystem {
    name: String,
    order: usize,
    lowpass: Vec<f64>,
}

impl WaveletSystem {
    /// Builds a system from explicit low-pass taps, validating the
    /// orthonormality identities to [`FILTER_IDENTITY_TOL`].
    pub fn from_lowpass(name: &str, order: usize, lowpass: Vec<f64>) -> Result<Self> {
        if lowpass.len() < 2 || lowpass.len() % 2 != 0 {
            return Err(Error::Parameter(format!(
                "low-pass filter needs a positive even tap count, got {}",
                lowpass.len()
            )));
        }
        if order == 0 {
            return Err(Error::Parameter("wavelet order must be at least 1".into()));
        }
        let sum: f64 = lowpass.iter().sum();
        if (sum - std::f64::consts::SQRT_2).abs() > FILTER_IDENTITY_TOL {
            return Err(Error::Parameter(format!(
                "low-pass taps sum to {sum}, expected sqrt(2)"
            )));
        }
        let l = lowpass.len();
        for shift in 0..l / 2 {
            let mut dot = 0.0;
            for n in 0..l {
                let m = n + 2 * shift;
                if m < l {
                    dot += lowpass[n] * lowpass[m];
                }
            }
            let expect = if shift == 0 { 1.0 } else { 0.0 };
            if (dot - expect).abs() > FILTER_IDENTITY_TOL {
                return Err(Error::Parameter(format!(
                    "shift-{shift} self product {dot}, expected {expect}"
                )));
            }
        }
        Ok(WaveletSystem {
            name: name.to_string(),
            order,
            lowpass,
        })
    }

    /// Piecewise-constant orthonormal system (one vanishing moment).
    pub fn haar() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        WaveletSystem::from_lowpass("haar", 1, vec![s, s]).expect("haar taps are valid")
    }

    /// Four-tap orthonormal system with two vanishing moments.
    pub fn db2() -> Self {
        let r3 = 3.0f64.sqrt();
        let c = 1.0 / (4.0 * std::f64::consts::SQRT_2);
        let taps = vec![
            (1.0 + r3) * c,
            (3.0 + r3) * c,
            (3.0 - r3) * c,
            (1.0 - r3) * c,
        ];
        WaveletSystem::from_lowpass("db2", 2, taps).expect("db2 taps are valid")
    }

    /// Six-tap orthonormal system with three vanishing moments.
    pub fn db3() -> Self {
        let s = 10.0f64.sqrt();
        let t = (5.0 + 2.0 * s).sqrt();
        let c = 1.0 / (16.0 * std::f64::consts::SQRT_2);
        let taps = vec![
            (1.0 + s + t) * c,
            (5.0 + s + 3.0 * t) * c,
            (10.0 - 2.0 * s + 2.0 * t) * c,
            (10.0 - 2.0 * s - 2.0 * t) * c,
            (5.0 + s - 3.0 * t) * c,
            (1.0 + s - t) * c,
        ];
        WaveletSystem::from_lowpass("db3", 3, taps).expect("db3 taps are valid")
    }

    /// Shipped system with the requested number of vanishing moments.
    pub fn by_order(order: usize) -> Result<Self> {
        match order {
            1 => Ok(WaveletSystem::haar()),
            2 => Ok(WaveletSystem::db2()),
            3 => Ok(WaveletSystem::db3()),
            _ => Err(Error::Parameter(format!(
                "no shipped filter with {order} vanishing moments (supported: 1, 2, 3)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of vanishing moments of the wavelet.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    /// Mirror high-pass taps `g[n] = (-1)^n h[L-1-n]`.
    pub fn highpass(&self) -> Vec<f64> {
        let l = self.lowpass.len();
        (0..l)
            .map(|n| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * self.lowpass[l - 1 - n]
            })
            .collect()
    }

    /// Both generator and wavelet are supported in `[-N, N]` with this `N`.
    pub fn support_radius(&self) -> usize {
        self.lowpass.len() - 1
    }

    /// Exact polynomial moment `∫ x^p ψ(x) dx` of the wavelet, computed from
    /// the refinement relation (see [`cascade::wavelet_moment`]).
    ///
    /// For `p < order` the result vanishes to rounding accuracy; the first
    /// non-vanishing moment is finite and filter-specific.
    pub fn vanishing_moment_residual(&self, p: usize) -> f64 {
        cascade::wavelet_moment(self, p)
    }
}
