//! Reference corner-singularity profiles with analytic derivatives.
//!
//! The leading singular behavior of second-order Dirichlet problems at a
//! corner of opening `θ` is `r^κ sin(κφ)` with `κ = π/θ`, the imaginary part
//! of `z^κ` on the wedge `0 < φ < θ` measured from the positive x-axis. The
//! profile here multiplies that power by a radial C² cutoff so it vanishes
//! before reaching the far boundary, which makes it an admissible test
//! function on any domain whose singular wedge starts on the positive
//! x-axis (the shipped L-shape and slit square both do).
//!
//! Derivatives up to second order are available in closed form, exactly what
//! the weighted-norm quadrature needs to certify finiteness thresholds
//! without finite-difference noise near the corner.

use crate::error::Error;
use crate::kondratiev::DerivFn;
use crate::Result;
use std::f64::consts::PI;

/// `r^κ sin(κφ)` times a radial cutoff that is 1 for `r ≤ inner` and 0 for
/// `r ≥ outer`, with `κ = π/θ` for a wedge of opening `θ` anchored on the
/// positive x-axis.
#[derive(Debug, Clone, Copy)]
pub struct CornerProfile {
    kappa: f64,
    inner: f64,
    outer: f64,
}

impl CornerProfile {
    /// Profile for a wedge of the given opening angle, with the default
    /// cutoff window `[0.3, 0.7]`.
    pub fn new(opening_angle: f64) -> Result<Self> {
        if !opening_angle.is_finite() || opening_angle <= 0.0 || opening_angle > 2.0 * PI {
            return Err(Error::Parameter(format!(
                "opening angle must lie in (0, 2π], got {opening_angle}"
            )));
        }
        Ok(CornerProfile { kappa: PI / opening_angle, inner: 0.3, outer: 0.7 })
    }

    /// Replaces the cutoff window; the profile is the pure power for
    /// `r ≤ inner` and vanishes identically for `r ≥ outer`.
    pub fn with_cutoff(mut self, inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner) || !outer.is_finite() {
            return Err(Error::Parameter(format!(
                "cutoff window needs 0 < inner < outer, got [{inner}, {outer}]"
            )));
        }
        self.inner = inner;
        self.outer = outer;
        Ok(self)
    }

    /// Singularity exponent `κ = π/θ`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn cutoff_window(&self) -> (f64, f64) {
        (self.inner, self.outer)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.derivative(0, 0, x, y)
    }

    /// Derivative `∂_x^ax ∂_y^ay` of the profile, `ax + ay ≤ 2`.
    ///
    /// The angle is taken in `[0, 2π)`, so the branch cut lies along the
    /// positive x-axis — on the wedge boundary, never inside it. At the
    /// corner itself every derivative is reported as 0; quadrature never
    /// evaluates there.
    pub fn derivative(&self, ax: usize, ay: usize, x: f64, y: f64) -> f64 {
        assert!(ax + ay <= 2, "corner profile provides derivatives up to order 2");
        let r = x.hypot(y);
        if r == 0.0 || r >= self.outer {
            return 0.0;
        }
        let (s, sx, sy, sxx, sxy, syy) = self.power_part(x, y, r);
        if r <= self.inner {
            return match (ax, ay) {
                (0, 0) => s,
                (1, 0) => sx,
                (0, 1) => sy,
                (2, 0) => sxx,
                (1, 1) => sxy,
                (0, 2) => syy,
                _ => unreachable!(),
            };
        }
        let (eta, detar, ddetar) = self.cutoff(r);
        // Radial chain rule for the cutoff factor.
        let ex = detar * x / r;
        let ey = detar * y / r;
        let exx = ddetar * x * x / (r * r) + detar * (1.0 / r - x * x / (r * r * r));
        let eyy = ddetar * y * y / (r * r) + detar * (1.0 / r - y * y / (r * r * r));
        let exy = ddetar * x * y / (r * r) - detar * x * y / (r * r * r);
        match (ax, ay) {
            (0, 0) => s * eta,
            (1, 0) => sx * eta + s * ex,
            (0, 1) => sy * eta + s * ey,
            (2, 0) => sxx * eta + 2.0 * sx * ex + s * exx,
            (0, 2) => syy * eta + 2.0 * sy * ey + s * eyy,
            (1, 1) => sxy * eta + sx * ey + sy * ex + s * exy,
            _ => unreachable!(),
        }
    }

    /// Boxed callback in the shape the weighted-norm quadrature expects.
    pub fn deriv_fn(&self) -> DerivFn {
        let profile = *self;
        Box::new(move |ax, ay, x, y| profile.derivative(ax, ay, x, y))
    }

    /// `Im z^κ` and its first and second derivatives, using the complex power
    /// with argument in `[0, 2π)`: `∂_x z^κ = κ z^{κ−1}` and
    /// `∂_y z^κ = iκ z^{κ−1}`.
    fn power_part(&self, x: f64, y: f64, r: f64) -> (f64, f64, f64, f64, f64, f64) {
        let k = self.kappa;
        let phi = {
            let a = y.atan2(x);
            if a < 0.0 {
                a + 2.0 * PI
            } else {
                a
            }
        };
        let zpow = |expo: f64| -> (f64, f64) {
            let rad = r.powf(expo);
            ((expo * phi).cos() * rad, (expo * phi).sin() * rad)
        };
        let (_, s) = zpow(k);
        let (d1re, d1im) = zpow(k - 1.0);
        let (d2re, d2im) = zpow(k - 2.0);
        let sx = k * d1im;
        let sy = k * d1re;
        let sxx = k * (k - 1.0) * d2im;
        let sxy = k * (k - 1.0) * d2re;
        let syy = -sxx;
        (s, sx, sy, sxx, sxy, syy)
    }

    /// Cutoff value and its first two radial derivatives for `inner < r <
    /// outer`, from the quintic step `S(t) = t³(10 − 15t + 6t²)` evaluated at
    /// `t = (outer − r)/(outer − inner)`; `S` has two vanishing derivatives
    /// at both ends, so the glued cutoff is C².
    fn cutoff(&self, r: f64) -> (f64, f64, f64) {
        let w = self.outer - self.inner;
        let t = (self.outer - r) / w;
        let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        let dds = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
        (s, -ds / w, dds / (w * w))
    }
}
