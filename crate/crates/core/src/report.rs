//! Aggregated regularity reports and time-regularity quotients.
//!
//! A report compares three smoothness readings of a computed evolution:
//! the fixed-integrability (Sobolev-type) estimate, the
//! nonlinear-approximation-scale estimate, and the rate fitted directly to
//! best-N-term errors. Adaptive approximation pays off exactly when the
//! second and third exceed the first, so the headline number is that gap.
//! Per-snapshot estimates are aggregated by medians over snapshots outside
//! the start-up window, where discrete transients from the zero initial
//! state pollute decay fits. Any fitted quantity with a poor coefficient of
//! determination is marked unreliable and excluded from gap claims.

use std::io::Write;

use serde::Serialize;

use crate::besov::{
    estimate_smoothness, fit_rate, n_term_curve, SmoothnessScale,
};
use crate::error::Error;
use crate::geometry::SingularDim;
use crate::wavelet::WaveletCoefficients;
use crate::Result;

/// Minimum coefficient of determination for a fit to support a claim.
pub const RELIABLE_R2: f64 = 0.9;

/// Fraction of the time horizon after `t = 0` whose snapshots are excluded
/// from aggregate estimates.
pub const STARTUP_FRACTION: f64 = 0.05;

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0 && beta <= 1.0) {
        return Err(Error::Parameter(format!(
            "time-regularity exponent must lie in (0, 1], got {beta}"
        )));
    }
    Ok(())
}

fn check_times(times: impl Iterator<Item = f64>) -> Result<usize> {
    let mut prev: Option<f64> = None;
    let mut count = 0;
    for t in times {
        if !t.is_finite() {
            return Err(Error::Parameter(format!("snapshot time {t} is not finite")));
        }
        if let Some(p) = prev {
            if t == p {
                return Err(Error::Unsorted(format!("duplicate snapshot time {t}")));
            }
            if t < p {
                return Err(Error::Unsorted(format!(
                    "snapshot times must increase, got {p} then {t}"
                )));
            }
        }
        prev = Some(t);
        count += 1;
    }
    if count < 2 {
        return Err(Error::InsufficientData(format!(
            "time-regularity quotients need at least 2 snapshots, got {count}"
        )));
    }
    Ok(count)
}

/// Largest difference quotient `|v(t) − v(s)| / |t − s|^β` over all snapshot
/// pairs of a scalar time series, typically norms of the solution. By the
/// reverse triangle inequality this is a lower bound for the quotient of
/// the underlying vector-valued path.
pub fn hoelder_scalar_quotient(norms: &[(f64, f64)], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    check_times(norms.iter().map(|p| p.0))?;
    let mut sup: f64 = 0.0;
    for i in 0..norms.len() {
        for j in i + 1..norms.len() {
            let (s, vs) = norms[i];
            let (t, vt) = norms[j];
            sup = sup.max((vt - vs).abs() / (t - s).abs().powf(beta));
        }
    }
    Ok(sup)
}

/// Largest difference quotient of a vector-valued path, with the Euclidean
/// norm on coefficient vectors. This is the primary time-regularity
/// reading; the scalar variant only bounds it from below.
pub fn hoelder_vector_quotient(snapshots: &[(f64, Vec<f64>)], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    check_times(snapshots.iter().map(|p| p.0))?;
    let len = snapshots[0].1.len();
    for (t, v) in snapshots {
        if v.len() != len {
            return Err(Error::Shape(format!(
                "coefficient vectors must share a length; snapshot at t = {t} has {} of {len}",
                v.len()
            )));
        }
    }
    let mut sup: f64 = 0.0;
    for i in 0..snapshots.len() {
        for j in i + 1..snapshots.len() {
            let (s, vs) = &snapshots[i];
            let (t, vt) = &snapshots[j];
            let diff: f64 =
                vs.iter().zip(vt).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            sup = sup.max(diff / (t - s).abs().powf(beta));
        }
    }
    Ok(sup)
}

/// A fitted value together with its regression quality.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitQuality {
    pub value: f64,
    pub r_squared: f64,
    /// True when the regression supports quoting the value.
    pub reliable: bool,
}

impl FitQuality {
    fn new(value: f64, r_squared: f64) -> FitQuality {
        FitQuality { value, r_squared, reliable: r_squared >= RELIABLE_R2 }
    }
}

/// Per-snapshot smoothness readings. Snapshots inside the start-up window
/// or with degenerate coefficients are kept in the table but flagged out of
/// the aggregates.
#[derive(Debug, Clone, Serialize)]
pub struct SnapshotEstimate {
    pub time: f64,
    pub included: bool,
    pub s_sobolev: f64,
    pub sobolev_r2: f64,
    pub s_adaptive: f64,
    pub adaptive_r2: f64,
    pub nterm_rate: f64,
    pub nterm_r2: f64,
}

/// Inputs of [`regularity_report`] beyond the snapshots themselves.
#[derive(Debug, Clone)]
pub struct ReportRequest {
    /// Final time of the underlying evolution.
    pub horizon: f64,
    /// Base integrability of the Sobolev-type estimate (and the metric of
    /// the N-term errors).
    pub p: f64,
    /// Spatial dimension.
    pub d: usize,
    /// Target smoothness entering the theoretical ceiling.
    pub gamma: f64,
    /// Operator half-order entering the theoretical ceiling.
    pub m: usize,
    /// Dimension of the domain's singular set.
    pub singular_dim: SingularDim,
    /// Term counts for the N-term error curve.
    pub counts: Vec<usize>,
}

impl ReportRequest {
    /// Upper limit `min(γ, 3m/δ)` on the adaptivity-scale smoothness, with
    /// `δ` the singular-set dimension; vertex-only singular sets (`δ = 0`)
    /// leave `γ` as the only cap.
    pub fn ceiling(&self) -> f64 {
        match self.singular_dim {
            SingularDim::Point => self.gamma,
            SingularDim::Edge => self.gamma.min(3.0 * self.m as f64),
        }
    }
}

/// Aggregated regularity verdict; see the module docs for the reading.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub s_sobolev: FitQuality,
    pub s_adaptive: FitQuality,
    /// Rate fitted to the measured N-term errors.
    pub nterm_rate: FitQuality,
    /// Rate implied by the Sobolev-type estimate for uniform refinement.
    pub uniform_rate: f64,
    /// `nterm_rate − uniform_rate`; absent when either fit is unreliable.
    pub gain: Option<f64>,
    /// `s_adaptive − s_sobolev`; absent when either fit is unreliable.
    pub smoothness_gain: Option<f64>,
    /// Theoretical ceiling for the adaptivity-scale smoothness.
    pub ceiling: f64,
    /// Whether the adaptive estimate respects the ceiling.
    pub below_ceiling: bool,
    pub snapshots: Vec<SnapshotEstimate>,
}

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Builds the aggregated report from per-time wavelet coefficients of the
/// solution snapshots.
///
/// Each snapshot gets all three smoothness readings; aggregates are medians
/// over snapshots later than [`STARTUP_FRACTION`] of the horizon whose
/// estimates succeeded. The reported regression quality of an aggregate is
/// the worst one among the contributing snapshots.
pub fn regularity_report(
    snapshots: &[(f64, WaveletCoefficients)],
    request: &ReportRequest,
) -> Result<RegularityReport> {
    if snapshots.is_empty() {
        return Err(Error::Dependency(
            "regularity report needs solve and coefficient artifacts; none were given".into(),
        ));
    }
    if !(request.horizon.is_finite() && request.horizon > 0.0) {
        return Err(Error::Parameter(format!(
            "report horizon must be positive, got {}",
            request.horizon
        )));
    }
    if request.gamma < 1.0 || request.m == 0 {
        return Err(Error::Parameter(format!(
            "ceiling needs smoothness target >= 1 and operator half-order >= 1, got {} and {}",
            request.gamma, request.m
        )));
    }
    check_times(snapshots.iter().map(|p| p.0)).or_else(|e| match e {
        // A single snapshot is fine for a report even though a quotient
        // would need two.
        Error::InsufficientData(_) => Ok(1),
        other => Err(other),
    })?;

    let cutoff = STARTUP_FRACTION * request.horizon;
    let mut rows = Vec::new();
    for (time, coeffs) in snapshots {
        let sob = estimate_smoothness(coeffs, request.p, request.d, SmoothnessScale::SobolevLike, None);
        let ada = estimate_smoothness(coeffs, request.p, request.d, SmoothnessScale::Adaptivity, None);
        let curve = n_term_curve(coeffs, &request.counts, request.p);
        let fit = curve.and_then(|c| fit_rate(&c, request.d, None));
        let degenerate = sob.is_err() || ada.is_err() || fit.is_err();
        let (s_sobolev, sobolev_r2) =
            sob.map(|e| (e.s, e.r2)).unwrap_or((f64::NAN, f64::NAN));
        let (s_adaptive, adaptive_r2) =
            ada.map(|e| (e.s, e.r2)).unwrap_or((f64::NAN, f64::NAN));
        let (nterm_rate, nterm_r2) =
            fit.map(|f| (f.s, f.r2)).unwrap_or((f64::NAN, f64::NAN));
        rows.push(SnapshotEstimate {
            time: *time,
            included: *time > cutoff && !degenerate,
            s_sobolev,
            sobolev_r2,
            s_adaptive,
            adaptive_r2,
            nterm_rate,
            nterm_r2,
        });
    }

    let included: Vec<&SnapshotEstimate> = rows.iter().filter(|r| r.included).collect();
    if included.is_empty() {
        return Err(Error::Dependency(
            "no snapshot outside the start-up window produced usable estimates".into(),
        ));
    }
    let agg = |value: fn(&SnapshotEstimate) -> f64, quality: fn(&SnapshotEstimate) -> f64| {
        let mut vals: Vec<f64> = included.iter().map(|r| value(r)).collect();
        let worst_r2 = included.iter().map(|r| quality(r)).fold(f64::INFINITY, f64::min);
        FitQuality::new(median(&mut vals), worst_r2)
    };
    let s_sobolev = agg(|r| r.s_sobolev, |r| r.sobolev_r2);
    let s_adaptive = agg(|r| r.s_adaptive, |r| r.adaptive_r2);
    let nterm_rate = agg(|r| r.nterm_rate, |r| r.nterm_r2);
    let uniform_rate = s_sobolev.value;
    let gain = (nterm_rate.reliable && s_sobolev.reliable)
        .then(|| nterm_rate.value - uniform_rate);
    let smoothness_gain = (s_adaptive.reliable && s_sobolev.reliable)
        .then(|| s_adaptive.value - s_sobolev.value);
    let ceiling = request.ceiling();
    Ok(RegularityReport {
        below_ceiling: s_adaptive.value < ceiling,
        s_sobolev,
        s_adaptive,
        nterm_rate,
        uniform_rate,
        gain,
        smoothness_gain,
        ceiling,
        snapshots: rows,
    })
}

/// Writes `(x, y)` rows as plain two-column text with a leading comment,
/// the format gnuplot consumes directly.
pub fn write_two_column<W: Write>(w: &mut W, rows: &[(f64, f64)], comment: &str) -> Result<()> {
    writeln!(w, "# {comment}")?;
    for (x, y) in rows {
        writeln!(w, "{x:.12e} {y:.12e}")?;
    }
    Ok(())
}
