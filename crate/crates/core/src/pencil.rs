//! Wedge operator-pencil spectra, eigenvalue-free strips, and weight-exponent
//! admissibility.
//!
//! For a second-order operator `−div(A∇·)` with constant symmetric positive
//! coefficients frozen at a corner of opening `θ`, separation `u = r^λ U(φ)`
//! reduces the corner problem to a parameter-dependent ODE in the angle,
//!
//! ```text
//! γ(φ) U'' + (2λ β(φ) + γ'(φ)) U' + λ (λ α(φ) + β'(φ)) U = 0,
//! ```
//!
//! where `α, β, γ` are the quadratic forms of `A` in the radial and angular
//! directions. Dirichlet eigenvalues `λ` are roots of the shooting
//! determinant: integrate from one edge with `U = 0, U' = 1` and evaluate `U`
//! at the other edge. For the Laplacian this determinant is `sin(λθ)/λ`,
//! giving the closed-form eigenvalues `±kπ/θ`.
//!
//! The strip free of eigenvalues around the energy line `Re λ = m − 1`
//! controls which weight exponents are admissible: an exponent `b` passes at
//! a corner with strip radii `(δ₋, δ₊)` when `−δ₋ < b + m < δ₊`.

use std::fmt;

use num_complex::Complex64;

use crate::error::Error;
use crate::Result;
use std::f64::consts::PI;

/// Half-width of the exclusion band around the energy line: eigenvalues are
/// never reported inside it, and strip radii are measured from it.
pub const ENERGY_LINE_TOL: f64 = 1e-8;

/// Sorted Dirichlet pencil eigenvalues `±kπ/θ`, `k = 1..=count`, for the
/// Laplacian on a wedge of opening `theta`.
pub fn dirichlet_laplace_wedge_eigenvalues(theta: f64, count: usize) -> Result<Vec<f64>> {
    check_theta(theta)?;
    if count == 0 {
        return Err(Error::Parameter("eigenvalue count must be at least 1".into()));
    }
    let mut out: Vec<f64> = (1..=count as i64)
        .flat_map(|k| {
            let lam = k as f64 * PI / theta;
            [-lam, lam]
        })
        .collect();
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(out)
}

fn check_theta(theta: f64) -> Result<()> {
    if !theta.is_finite() || theta <= 0.0 || theta > 2.0 * PI {
        return Err(Error::Parameter(format!(
            "wedge opening must lie in (0, 2π], got {theta}"
        )));
    }
    Ok(())
}

/// Second-order pencil on a wedge: opening angle and frozen symmetric
/// positive-definite principal coefficients.
#[derive(Debug, Clone, Copy)]
pub struct WedgePencil {
    theta: f64,
    a11: f64,
    a12: f64,
    a22: f64,
}

impl WedgePencil {
    /// Validates the opening angle and that the coefficient matrix is
    /// symmetric with smallest eigenvalue bounded away from zero.
    pub fn new(theta: f64, matrix: [[f64; 2]; 2]) -> Result<Self> {
        check_theta(theta)?;
        if matrix[0][1] != matrix[1][0] {
            return Err(Error::Parameter(format!(
                "coefficient matrix must be symmetric, got off-diagonal {} vs {}",
                matrix[0][1], matrix[1][0]
            )));
        }
        let pencil = WedgePencil { theta, a11: matrix[0][0], a12: matrix[0][1], a22: matrix[1][1] };
        let c = pencil.ellipticity_constant();
        if !(c > 1e-12) {
            return Err(Error::Ellipticity(format!(
                "coefficient matrix must be positive definite, smallest eigenvalue {c}"
            )));
        }
        Ok(pencil)
    }

    /// Identity coefficients: the Dirichlet Laplacian pencil.
    pub fn laplacian(theta: f64) -> Result<Self> {
        Self::new(theta, [[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.a11, self.a12], [self.a12, self.a22]]
    }

    /// Smallest eigenvalue of the coefficient matrix.
    pub fn ellipticity_constant(&self) -> f64 {
        let tr = self.a11 + self.a22;
        let gap = ((self.a11 - self.a22).powi(2) + 4.0 * self.a12 * self.a12).sqrt();
        0.5 * (tr - gap)
    }

    /// True when the coefficients are a positive multiple of the identity, in
    /// which case the spectrum is `±kπ/θ` in closed form.
    pub fn is_isotropic(&self) -> bool {
        self.a12 == 0.0 && self.a11 == self.a22
    }

    /// ODE data at angle `phi`: `(α, β, γ, β', γ')` where `α = e·Ae`,
    /// `β = e·Ae'`, `γ = e'·Ae'` for the direction `e(φ)`.
    fn ode_coeffs(&self, phi: f64) -> (f64, f64, f64, f64, f64) {
        let (a, b, c) = (self.a11, self.a12, self.a22);
        let (s2, c2) = (2.0 * phi).sin_cos();
        let mean = 0.5 * (a + c);
        let half_diff = 0.5 * (a - c);
        let alpha = mean + half_diff * c2 + b * s2;
        let beta = -half_diff * s2 + b * c2;
        let gamma = mean - half_diff * c2 - b * s2;
        let dbeta = -2.0 * half_diff * c2 - 2.0 * b * s2;
        let dgamma = 2.0 * half_diff * s2 - 2.0 * b * c2;
        (alpha, beta, gamma, dbeta, dgamma)
    }

    /// Shooting determinant `D(λ)`: integrate the angular ODE across the
    /// wedge with `U = 0, U' = 1` at the left edge and return `U` at the
    /// right edge. Zeros of `D` are the pencil eigenvalues. The integrator
    /// is a fixed-step fourth-order Runge–Kutta scheme, deterministic and
    /// accurate to well below the root tolerances used by the scans.
    pub fn determinant(&self, lambda: Complex64) -> Complex64 {
        let steps = ((6000.0 * self.theta / PI).ceil() as usize).max(3000);
        let h = self.theta / steps as f64;
        let start = -0.5 * self.theta;
        let mut u = Complex64::new(0.0, 0.0);
        let mut v = Complex64::new(1.0, 0.0);
        let rhs = |phi: f64, u: Complex64, v: Complex64| -> (Complex64, Complex64) {
            let (alpha, beta, gamma, dbeta, dgamma) = self.ode_coeffs(phi);
            let vp = -((2.0 * lambda * beta + dgamma) * v + lambda * (lambda * alpha + dbeta) * u)
                / gamma;
            (v, vp)
        };
        for k in 0..steps {
            let phi = start + k as f64 * h;
            let (k1u, k1v) = rhs(phi, u, v);
            let (k2u, k2v) = rhs(phi + 0.5 * h, u + 0.5 * h * k1u, v + 0.5 * h * k1v);
            let (k3u, k3v) = rhs(phi + 0.5 * h, u + 0.5 * h * k2u, v + 0.5 * h * k2v);
            let (k4u, k4v) = rhs(phi + h, u + h * k3u, v + h * k3v);
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        u
    }
}

/// How a spectrum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMethod {
    ClosedForm,
    Shooting,
}

impl fmt::Display for SpectrumMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumMethod::ClosedForm => write!(f, "closed-form"),
            SpectrumMethod::Shooting => write!(f, "shooting"),
        }
    }
}

/// Eigenvalues found in a search window and the resulting strip radii around
/// the energy line `Re λ = 0` (second-order pencils, `m = 1`).
#[derive(Debug, Clone)]
pub struct StripReport {
    pub theta: f64,
    pub delta_minus: f64,
    pub delta_plus: f64,
    pub eigenvalues: Vec<Complex64>,
    pub method: SpectrumMethod,
}

impl fmt::Display for StripReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "theta={:.9} delta_minus={:.9} delta_plus={:.9} method={} eigenvalues=[",
            self.theta, self.delta_minus, self.delta_plus, self.method
        )?;
        for (i, ev) in self.eigenvalues.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            if ev.im.abs() > ENERGY_LINE_TOL {
                write!(f, "{:.9}{:+.9}i", ev.re, ev.im)?;
            } else {
                write!(f, "{:.9}", ev.re)?;
            }
        }
        write!(f, "]")
    }
}

/// Locates pencil eigenvalues with real part in `real_range` and imaginary
/// part within `±imag_window` by scanning the shooting determinant.
///
/// Real roots come from sign changes on a fine grid refined by bisection.
/// When `imag_window > 0`, an argument-principle walk around the search
/// rectangle counts all enclosed zeros; a mismatch against the real roots
/// triggers a complex Newton hunt, and an unresolved mismatch is an error.
pub fn pencil_spectrum_numeric(
    pencil: &WedgePencil,
    real_range: (f64, f64),
    imag_window: f64,
) -> Result<StripReport> {
    let (lo, hi) = real_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || !imag_window.is_finite() || imag_window < 0.0
    {
        return Err(Error::Parameter(format!(
            "search window must be bounded with lo < hi, got [{lo}, {hi}] x ±{imag_window}"
        )));
    }
    let d_real = |x: f64| pencil.determinant(Complex64::new(x, 0.0)).re;

    // Real-axis scan. Eigenvalue spacing for these pencils is at least
    // π/(2π) = 1/2, so a 0.02 grid cannot skip a sign change.
    let step = 0.02;
    let n = ((hi - lo) / step).ceil() as usize;
    let mut real_roots = Vec::new();
    let mut prev_x = lo;
    let mut prev_d = d_real(prev_x);
    for k in 1..=n {
        let x = (lo + k as f64 * step).min(hi);
        let d = d_real(x);
        if prev_d == 0.0 {
            real_roots.push(prev_x);
        } else if prev_d * d < 0.0 {
            real_roots.push(bisect_root(&d_real, prev_x, x, prev_d));
        }
        prev_x = x;
        prev_d = d;
    }
    if prev_d == 0.0 {
        real_roots.push(prev_x);
    }
    for &r in &real_roots {
        if r.abs() < ENERGY_LINE_TOL {
            return Err(Error::Unresolved(format!(
                "determinant root at {r} sits on the energy line; the pencil is outside the supported class"
            )));
        }
    }
    let mut eigenvalues: Vec<Complex64> =
        real_roots.iter().map(|&r| Complex64::new(r, 0.0)).collect();

    if imag_window > 0.0 {
        let expected = winding_zero_count(pencil, (lo, hi), imag_window)?;
        if expected != eigenvalues.len() {
            complex_hunt(pencil, (lo, hi), imag_window, &mut eigenvalues)?;
            if winding_zero_count(pencil, (lo, hi), imag_window)? != eigenvalues.len() {
                return Err(Error::Unresolved(format!(
                    "argument principle counts {expected} zeros in [{lo}, {hi}] x ±{imag_window} but root refinement located {}",
                    eigenvalues.len()
                )));
            }
        }
    }
    eigenvalues.sort_by(|p, q| (p.re, p.im).partial_cmp(&(q.re, q.im)).unwrap());
    let (delta_minus, delta_plus) = strips_from_eigenvalues(&eigenvalues, lo, hi);
    Ok(StripReport {
        theta: pencil.theta(),
        delta_minus,
        delta_plus,
        eigenvalues,
        method: SpectrumMethod::Shooting,
    })
}

/// Strip radii around the energy line, capped by the searched window: the
/// report can never certify a wider strip than it scanned.
fn strips_from_eigenvalues(eigenvalues: &[Complex64], lo: f64, hi: f64) -> (f64, f64) {
    let mut delta_plus = hi.max(0.0);
    let mut delta_minus = (-lo).max(0.0);
    for ev in eigenvalues {
        if ev.re > ENERGY_LINE_TOL {
            delta_plus = delta_plus.min(ev.re);
        } else if ev.re < -ENERGY_LINE_TOL {
            delta_minus = delta_minus.min(-ev.re);
        }
    }
    (delta_minus, delta_plus)
}

fn bisect_root(d: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, d_lo: f64) -> f64 {
    let mut sign_lo = d_lo.signum();
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        let dm = d(mid);
        if dm == 0.0 {
            return mid;
        }
        if dm.signum() == sign_lo {
            lo = mid;
            sign_lo = dm.signum();
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Counts determinant zeros inside the rectangle by accumulating the phase
/// of `D` along its boundary; the total winding divided by 2π is the count.
fn winding_zero_count(
    pencil: &WedgePencil,
    (lo, hi): (f64, f64),
    imag_window: f64,
) -> Result<usize> {
    let corners = [
        Complex64::new(lo, -imag_window),
        Complex64::new(hi, -imag_window),
        Complex64::new(hi, imag_window),
        Complex64::new(lo, imag_window),
    ];
    let mut total_turn = 0.0;
    let mut prev = pencil.determinant(corners[0]);
    for side in 0..4 {
        let from = corners[side];
        let to = corners[(side + 1) % 4];
        let length = (to - from).norm();
        let steps = ((length * 120.0).ceil() as usize).max(60);
        for k in 1..=steps {
            let z = from + (to - from) * (k as f64 / steps as f64);
            let d = pencil.determinant(z);
            if d.norm() < 1e-300 {
                return Err(Error::Unresolved(format!(
                    "determinant vanishes on the search boundary near {z}"
                )));
            }
            let turn = (d / prev).arg();
            if turn.abs() > 0.9 * PI {
                return Err(Error::Unresolved(format!(
                    "phase step too large on the search boundary near {z}; widen or shift the window"
                )));
            }
            total_turn += turn;
            prev = d;
        }
    }
    let winding = total_turn / (2.0 * PI);
    let rounded = winding.round();
    if (winding - rounded).abs() > 0.2 || rounded < 0.0 {
        return Err(Error::Unresolved(format!(
            "argument-principle winding {winding} is not close to an integer"
        )));
    }
    Ok(rounded as usize)
}

/// Newton iteration in the complex plane from a seed grid; appends any roots
/// not already present. The derivative is a central difference, valid since
/// the determinant is analytic in `λ`.
fn complex_hunt(
    pencil: &WedgePencil,
    (lo, hi): (f64, f64),
    imag_window: f64,
    eigenvalues: &mut Vec<Complex64>,
) -> Result<()> {
    let delta = Complex64::new(1e-7, 0.0);
    for i in 0..16 {
        for j in 0..8 {
            let mut z = Complex64::new(
                lo + (hi - lo) * (i as f64 + 0.5) / 16.0,
                -imag_window + 2.0 * imag_window * (j as f64 + 0.5) / 8.0,
            );
            let mut converged = false;
            for _ in 0..60 {
                let d = pencil.determinant(z);
                let dp = (pencil.determinant(z + delta) - pencil.determinant(z - delta))
                    / (2.0 * delta);
                if dp.norm() < 1e-300 {
                    break;
                }
                let step = d / dp;
                z -= step;
                if step.norm() < 1e-11 {
                    converged = true;
                    break;
                }
            }
            let inside = z.re > lo && z.re < hi && z.im.abs() < imag_window;
            if converged && inside && pencil.determinant(z).norm() < 1e-8 {
                if z.re.abs() < ENERGY_LINE_TOL {
                    return Err(Error::Unresolved(format!(
                        "complex refinement landed on the energy line at {z}"
                    )));
                }
                if !eigenvalues.iter().any(|e| (e - z).norm() < 1e-6) {
                    eigenvalues.push(z);
                }
            }
        }
    }
    Ok(())
}

/// Strip radii `(δ₋, δ₊)` for the pencil: closed form `π/θ` for isotropic
/// coefficients, otherwise a shooting scan over a default window wide enough
/// for every admissibility check in this crate.
pub fn delta_strips(pencil: &WedgePencil) -> Result<(f64, f64)> {
    if pencil.is_isotropic() {
        let d = PI / pencil.theta();
        return Ok((d, d));
    }
    let report = pencil_spectrum_numeric(pencil, (-4.6, 4.6), 1.0)?;
    Ok((report.delta_minus, report.delta_plus))
}

/// Weight-exponent budget for a target smoothness: base weight `a`, the
/// derived ladder `b_i = a + 2m(γ_m − i)` with `γ_m = ⌊(γ−1)/(2m)⌋`, the
/// fixed auxiliary exponent `b' = −m`, and the strip radii of every singular
/// vertex the exponents must clear.
#[derive(Debug, Clone)]
pub struct WeightBudget {
    pub m: usize,
    pub a: f64,
    pub gamma: f64,
    pub strips: Vec<(f64, f64)>,
}

impl WeightBudget {
    pub fn new(m: usize, a: f64, gamma: f64, strips: Vec<(f64, f64)>) -> Result<Self> {
        if m == 0 {
            return Err(Error::Parameter("weight budget needs m >= 1".into()));
        }
        let mf = m as f64;
        if !a.is_finite() || a < -mf || a > mf {
            return Err(Error::Parameter(format!(
                "base weight must lie in [-{m}, {m}], got {a}"
            )));
        }
        if !gamma.is_finite() || gamma < 1.0 {
            return Err(Error::Parameter(format!(
                "target smoothness must be at least 1, got {gamma}"
            )));
        }
        if strips.is_empty() {
            return Err(Error::Parameter(
                "weight budget needs strip radii for at least one singular vertex".into(),
            ));
        }
        for &(dm, dp) in &strips {
            if !(dm > 0.0 && dp > 0.0) {
                return Err(Error::Parameter(format!(
                    "strip radii must be positive, got ({dm}, {dp})"
                )));
            }
        }
        Ok(WeightBudget { m, a, gamma, strips })
    }

    /// Ladder depth `γ_m = ⌊(γ−1)/(2m)⌋`.
    pub fn gamma_m(&self) -> usize {
        ((self.gamma - 1.0) / (2.0 * self.m as f64)).floor() as usize
    }

    /// The exponent ladder `b_i = a + 2m(γ_m − i)`, `i = 0..=γ_m`.
    pub fn b_values(&self) -> Vec<f64> {
        let gm = self.gamma_m();
        (0..=gm)
            .map(|i| self.a + 2.0 * self.m as f64 * (gm - i) as f64)
            .collect()
    }
}

/// One admissibility check: exponent `b` must satisfy `lower < b < upper`,
/// where the bounds are `−δ₋ − m` and `δ₊ − m` with the strip radii taken as
/// the infimum over all singular vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityRow {
    pub index: usize,
    pub b: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// Half-open/closed interval of admissible base weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl AdmissibleInterval {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn contains(&self, a: f64) -> bool {
        let above = if self.lo_closed { a >= self.lo } else { a > self.lo };
        let below = if self.hi_closed { a <= self.hi } else { a < self.hi };
        above && below
    }
}

impl fmt::Display for AdmissibleInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "empty");
        }
        write!(
            f,
            "{}{:.9}, {:.9}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' },
        )
    }
}

/// Full admissibility verdict for a budget: one row per ladder exponent, the
/// auxiliary `b' = −m` row, and the interval of base weights for which every
/// check passes, intersected with `[−m, m]`.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub rows: Vec<AdmissibilityRow>,
    pub b_prime: AdmissibilityRow,
    pub interval: AdmissibleInterval,
    pub all_pass: bool,
}

impl AdmissibilityReport {
    /// CSV rows `(i, b, lower, upper, pass)`; the auxiliary exponent is
    /// listed last with index label `aux`.
    pub fn csv_rows(&self) -> Vec<String> {
        let mut out = vec!["i,b,lower,upper,pass".to_string()];
        for row in &self.rows {
            out.push(format!(
                "{},{:.12},{:.12},{:.12},{}",
                row.index, row.b, row.lower, row.upper, row.pass
            ));
        }
        out.push(format!(
            "aux,{:.12},{:.12},{:.12},{}",
            self.b_prime.b, self.b_prime.lower, self.b_prime.upper, self.b_prime.pass
        ));
        out
    }
}

/// Checks every exponent in the budget against the strip bounds and derives
/// the admissible base-weight interval.
pub fn weight_admissible(budget: &WeightBudget) -> Result<AdmissibilityReport> {
    let mf = budget.m as f64;
    let delta_minus = budget.strips.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let delta_plus = budget.strips.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let (lower, upper) = (-delta_minus - mf, delta_plus - mf);

    let rows: Vec<AdmissibilityRow> = budget
        .b_values()
        .iter()
        .enumerate()
        .map(|(i, &b)| AdmissibilityRow {
            index: i,
            b,
            lower,
            upper,
            pass: lower < b && b < upper,
        })
        .collect();
    let b_prime = AdmissibilityRow {
        index: rows.len(),
        b: -mf,
        lower,
        upper,
        pass: lower < -mf && -mf < upper,
    };

    // Each ladder exponent b_i = a + offset_i constrains a to the open
    // interval (lower − offset_i, upper − offset_i); intersect over i, then
    // with the closed base range [−m, m].
    let gm = budget.gamma_m();
    let mut lo_open = f64::NEG_INFINITY;
    let mut hi_open = f64::INFINITY;
    for i in 0..=gm {
        let offset = 2.0 * mf * (gm - i) as f64;
        lo_open = lo_open.max(lower - offset);
        hi_open = hi_open.min(upper - offset);
    }
    let interval = AdmissibleInterval {
        lo: lo_open.max(-mf),
        hi: hi_open.min(mf),
        lo_closed: -mf > lo_open,
        hi_closed: mf < hi_open,
    };
    let all_pass = rows.iter().all(|r| r.pass) && b_prime.pass;
    Ok(AdmissibilityReport { rows, b_prime, interval, all_pass })
}
