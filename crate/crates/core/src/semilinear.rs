//! Fixed-point solver for the semilinear problem
//! `∂ₜu − div(a∇u) + c u + ε uᴹ = f` with zero initial and boundary data.
//!
//! A solution is a fixed point of `u ↦ L̃⁻¹(f − ε uᴹ)` where `L̃⁻¹` is one
//! linear parabolic solve. The module provides the smallness conditions
//! under which that map contracts on a ball around the linear solution,
//! surrogate norms for monitoring the iteration, and the iteration itself
//! with contraction and ball-containment reporting.
//!
//! Surrogate norms: the solution norm (`S`) is the discrete
//! `L2`-in-time `H¹`-in-space norm plus the `L2` norm of the discrete time
//! derivative; the data norm (`D`) is the discrete `L2` norm over the
//! space-time cylinder, optionally with time-derivative jets of the data.
//! Both are deliberately stronger than the weakest norms for which the
//! underlying estimates hold.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::grid::MaskedGrid;
use crate::parabolic::{
    rothe_solve, rothe_solve_with, DiscreteSolution, ParabolicProblem, Scheme, SpaceTimeFn,
};
use crate::Result;

/// Default constant in the contraction estimate; not computable from first
/// principles, so it is a config input and the checker reports sensitivity.
pub const DEFAULT_CONTRACTION_CONSTANT: f64 = 1.0;

/// Parameters of the fixed-point run and of the smallness conditions.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointConfig {
    /// Nonlinearity strength in `ε uᴹ`.
    pub epsilon: f64,
    /// Nonlinearity power `M ≥ 2`.
    pub power: u32,
    /// Ball factor `r₀ > 1`; the iteration ball has radius
    /// `(r₀ − 1) · η · opnorm` around the linear solution.
    pub r0: f64,
    /// Data norm surrogate `η = ‖f‖_D`.
    pub eta: f64,
    /// Estimate of the inverse operator norm `‖L̃⁻¹‖`.
    pub opnorm: f64,
    /// Contraction-estimate constant.
    pub c: f64,
    /// Fixed-point stopping tolerance on the step norm.
    pub tol: f64,
    pub maxiter: usize,
}

impl FixedPointConfig {
    pub fn new(epsilon: f64, power: u32, r0: f64, eta: f64, opnorm: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Parameter(format!(
                "nonlinearity strength must be nonnegative, got {epsilon}"
            )));
        }
        if power < 2 {
            return Err(Error::Parameter(format!("nonlinearity power must be >= 2, got {power}")));
        }
        if !(r0.is_finite() && r0 > 1.0) {
            return Err(Error::Parameter(format!("ball factor must exceed 1, got {r0}")));
        }
        if !(eta.is_finite() && eta >= 0.0) || !(opnorm.is_finite() && opnorm > 0.0) {
            return Err(Error::Parameter(format!(
                "data norm {eta} must be nonnegative and inverse norm {opnorm} positive"
            )));
        }
        Ok(FixedPointConfig {
            epsilon,
            power,
            r0,
            eta,
            opnorm,
            c: DEFAULT_CONTRACTION_CONSTANT,
            tol: 1e-8,
            maxiter: 25,
        })
    }

    pub fn with_constant(mut self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Parameter(format!("estimate constant must be positive, got {c}")));
        }
        self.c = c;
        Ok(self)
    }

    pub fn with_stopping(mut self, tol: f64, maxiter: usize) -> Result<Self> {
        if !(tol.is_finite() && tol > 0.0) || maxiter == 0 {
            return Err(Error::Parameter(format!(
                "stopping needs a positive tolerance and at least one iteration, got {tol}, {maxiter}"
            )));
        }
        self.tol = tol;
        self.maxiter = maxiter;
        Ok(self)
    }

    /// Radius `R = (r₀ − 1) · η · opnorm` of the containment ball around the
    /// linear solution.
    pub fn radius(&self) -> f64 {
        (self.r0 - 1.0) * self.eta * self.opnorm
    }
}

/// Which smallness condition applies, decided by whether
/// `r₀ · opnorm · η` exceeds 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallnessBranch {
    /// `r₀ · opnorm · η ≤ 1`: the inverse norm itself must be small,
    /// `opnorm < ((r₀−1)/r₀) · 1/(c ε M)`.
    SmallData,
    /// `r₀ · opnorm · η > 1`: the combined condition
    /// `η^{2(M−1)} · opnorm^{2M−1} ≤ (1/(c ε M)) · (r₀−1) · (1/r₀)^{2M−1}`.
    LargeData,
}

impl std::fmt::Display for SmallnessBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SmallnessBranch::SmallData => write!(f, "small-data"),
            SmallnessBranch::LargeData => write!(f, "large-data"),
        }
    }
}

/// Verdict of the smallness check: the branch taken, both sides of its
/// inequality, the ball radius, and how large the estimate constant could
/// grow before the verdict flips.
#[derive(Debug, Clone)]
pub struct SmallnessReport {
    pub branch: SmallnessBranch,
    /// The branch selector `r₀ · opnorm · η`.
    pub branch_product: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    pub radius: f64,
    /// Largest estimate constant `c` for which the check still passes.
    pub largest_passing_c: f64,
    /// Caveat on the exponent choice baked into the large-data condition.
    pub note: &'static str,
}

impl std::fmt::Display for SmallnessReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "branch={} selector={:.6e} lhs={:.6e} rhs={:.6e} pass={} radius={:.6e} largest_passing_c={:.6e}",
            self.branch,
            self.branch_product,
            self.lhs,
            self.rhs,
            self.pass,
            self.radius,
            self.largest_passing_c
        )
    }
}

/// Evaluates the applicable smallness condition for the config.
pub fn smallness_check(config: &FixedPointConfig) -> SmallnessReport {
    let m = config.power as f64;
    let inv_cem = 1.0 / (config.c * config.epsilon.max(f64::MIN_POSITIVE) * m);
    let branch_product = config.r0 * config.opnorm * config.eta;
    let (branch, lhs, rhs) = if branch_product > 1.0 {
        let lhs = config.eta.powi(2 * (config.power as i32 - 1))
            * config.opnorm.powi(2 * config.power as i32 - 1);
        let rhs = inv_cem * (config.r0 - 1.0) * config.r0.powi(-(2 * config.power as i32 - 1));
        (SmallnessBranch::LargeData, lhs, rhs)
    } else {
        let rhs = (config.r0 - 1.0) / config.r0 * inv_cem;
        (SmallnessBranch::SmallData, config.opnorm, rhs)
    };
    let pass = match branch {
        SmallnessBranch::SmallData => lhs < rhs,
        SmallnessBranch::LargeData => lhs <= rhs,
    };
    // Both right-hand sides scale as 1/c, so the flip point in c is exact.
    let largest_passing_c = if lhs > 0.0 { rhs * config.c / lhs } else { f64::INFINITY };
    SmallnessReport {
        branch,
        branch_product,
        lhs,
        rhs,
        pass,
        radius: config.radius(),
        largest_passing_c,
        note: "large-data condition uses exponents 2(M-1) on the data norm and 2M-1 on the \
               inverse norm; the underlying one-step estimate scales like M-1, so this choice \
               is the conservative one",
    }
}

fn require_full_stride(sol: &DiscreteSolution) -> Result<()> {
    if sol.len() != sol.steps_total() + 1 {
        return Err(Error::Parameter(
            "surrogate norms need every snapshot; re-run the solve with stride 1".into(),
        ));
    }
    Ok(())
}

/// Solution-norm surrogate of a full-stride march: discrete
/// `(∫ (‖u‖² + |u|²_{H¹}) dt + ∫ ‖∂ₜu‖² dt)^{1/2}`.
pub fn evolution_norm(sol: &DiscreteSolution) -> Result<f64> {
    require_full_stride(sol)?;
    difference_evolution_norm_impl(sol, None)
}

/// Solution-norm surrogate of the difference of two marches on the same
/// grid and time grid.
pub fn difference_evolution_norm(a: &DiscreteSolution, b: &DiscreteSolution) -> Result<f64> {
    require_full_stride(a)?;
    require_full_stride(b)?;
    if !std::ptr::eq(a.grid(), b.grid()) || a.len() != b.len() || a.dt() != b.dt() {
        return Err(Error::Shape(
            "difference norm needs marches on the same grid and time grid".into(),
        ));
    }
    difference_evolution_norm_impl(a, Some(b))
}

fn difference_evolution_norm_impl(a: &DiscreteSolution, b: Option<&DiscreteSolution>) -> Result<f64> {
    let grid = a.grid();
    let dt = a.dt();
    let n = grid.node_count();
    let mut curr = vec![0.0; n];
    let mut rate = vec![0.0; n];
    let mut acc = 0.0;
    for step in 1..a.len() {
        let (ua, ub_prev) = (a.snapshot(step), a.snapshot(step - 1));
        match b {
            Some(b) => {
                let (va, vb_prev) = (b.snapshot(step), b.snapshot(step - 1));
                for i in 0..n {
                    curr[i] = ua[i] - va[i];
                    rate[i] = (ua[i] - va[i] - (ub_prev[i] - vb_prev[i])) / dt;
                }
            }
            None => {
                for i in 0..n {
                    curr[i] = ua[i];
                    rate[i] = (ua[i] - ub_prev[i]) / dt;
                }
            }
        }
        let l2 = grid.l2_norm(&curr);
        let h1 = grid.h1_seminorm(&curr);
        let dl2 = grid.l2_norm(&rate);
        acc += (l2 * l2 + h1 * h1 + dl2 * dl2) * dt;
    }
    Ok(acc.sqrt())
}

/// Data-norm surrogate of a forcing term: discrete `L2` over the space-time
/// cylinder, plus the same norm of its time-derivative jets up to
/// `jet_order` (at most 2), estimated by finite differences in time.
pub fn data_norm(
    grid: &MaskedGrid,
    f: &SpaceTimeFn,
    horizon: f64,
    dt: f64,
    jet_order: usize,
) -> Result<f64> {
    if jet_order > 2 {
        return Err(Error::Parameter(format!(
            "data-norm jets are implemented up to order 2, requested {jet_order}"
        )));
    }
    if !(horizon.is_finite() && horizon > 0.0 && dt.is_finite() && dt > 0.0) {
        return Err(Error::Parameter(format!(
            "data norm needs positive horizon and step, got {horizon}, {dt}"
        )));
    }
    let steps = (horizon / dt).round() as usize;
    if steps < 2 {
        return Err(Error::InsufficientData(
            "data-norm jets need at least two time steps".into(),
        ));
    }
    let samples: Vec<Vec<f64>> =
        (0..=steps).map(|k| grid.project(|x, y| f(k as f64 * dt, x, y))).collect();
    let time_derivative = |series: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let last = series.len() - 1;
        (0..=last)
            .map(|k| {
                let mut out = vec![0.0; series[0].len()];
                for i in 0..out.len() {
                    out[i] = if k == 0 {
                        (-3.0 * series[0][i] + 4.0 * series[1][i] - series[2][i]) / (2.0 * dt)
                    } else if k == last {
                        (3.0 * series[last][i] - 4.0 * series[last - 1][i] + series[last - 2][i])
                            / (2.0 * dt)
                    } else {
                        (series[k + 1][i] - series[k - 1][i]) / (2.0 * dt)
                    };
                }
                out
            })
            .collect()
    };
    let mut acc = 0.0;
    let mut jets = samples;
    for order in 0..=jet_order {
        for item in jets.iter().skip(1) {
            let l2 = grid.l2_norm(item);
            acc += l2 * l2 * dt;
        }
        if order < jet_order {
            jets = time_derivative(&jets);
        }
    }
    Ok(acc.sqrt())
}

/// Estimates `‖L̃⁻¹‖` as the largest ratio of solution norm to data norm
/// over a fixed seeded family of separable probes `sin(ωπt/T)·w(x,y)` with
/// random low-frequency mode mixtures `w`; every probe vanishes at `t = 0`.
pub fn estimate_inverse_norm(
    problem: &ParabolicProblem,
    dt: f64,
    probe_count: usize,
) -> Result<f64> {
    estimate_inverse_norm_with_amplitude(problem, dt, probe_count, 1.0)
}

/// Same estimate with every probe scaled by `amplitude`; the result is
/// amplitude-invariant by linearity, and exposing the knob makes that
/// checkable.
pub fn estimate_inverse_norm_with_amplitude(
    problem: &ParabolicProblem,
    dt: f64,
    probe_count: usize,
    amplitude: f64,
) -> Result<f64> {
    if probe_count == 0 {
        return Err(Error::Parameter("inverse-norm estimation needs at least one probe".into()));
    }
    if !(amplitude.is_finite() && amplitude != 0.0) {
        return Err(Error::Parameter(format!(
            "probe amplitude must be finite and nonzero, got {amplitude}"
        )));
    }
    let grid = problem.grid();
    let horizon = problem.horizon();
    let (lo, hi) = grid.domain().bounding_box();
    let (wx, wy) = (hi.x - lo.x, hi.y - lo.y);
    let pi = std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(0x4c74_696c);
    let mut best: f64 = 0.0;
    for probe in 0..probe_count {
        let omega = (1 + probe % 2) as f64;
        let coeffs: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spatial = grid.project(|x, y| {
            let mut acc = 0.0;
            for k in 1..=3usize {
                for l in 1..=3usize {
                    acc += coeffs[(k - 1) * 3 + (l - 1)]
                        * (k as f64 * pi * (x - lo.x) / wx).sin()
                        * (l as f64 * pi * (y - lo.y) / wy).sin();
                }
            }
            amplitude * acc
        });
        let tau = move |t: f64| (omega * pi * t / horizon).sin();

        let mut g_norm_sq = 0.0;
        let steps = (horizon / dt).round() as usize;
        for k in 1..=steps {
            let l2 = tau(k as f64 * dt).abs() * grid.l2_norm(&spatial);
            g_norm_sq += l2 * l2 * dt;
        }
        if g_norm_sq == 0.0 {
            continue;
        }
        let sol = rothe_solve_with(
            grid,
            problem.coefficients(),
            horizon,
            dt,
            Scheme::ImplicitEuler,
            &mut |t, out| {
                let w = tau(t);
                for &id in grid.interior_ids() {
                    out[id] = w * spatial[id];
                }
            },
        )?;
        let ratio = evolution_norm(&sol)? / g_norm_sq.sqrt();
        best = best.max(ratio);
    }
    if best == 0.0 {
        return Err(Error::InsufficientData("all inverse-norm probes degenerated".into()));
    }
    Ok(best)
}

/// Full record of a fixed-point run: every iterate (the first is the linear
/// solution), step norms between consecutive iterates, semilinear equation
/// residuals per iterate, and distances from the linear solution.
pub struct IterationHistory<'g> {
    pub iterates: Vec<DiscreteSolution<'g>>,
    /// `‖u_{k+1} − u_k‖_S`; one entry per completed iteration.
    pub step_norms: Vec<f64>,
    /// Discrete `L2` residual of the semilinear equation per iterate.
    pub residuals: Vec<f64>,
    /// `‖u_k − u_0‖_S` per iterate; zero for the linear solution itself.
    pub ball_distances: Vec<f64>,
}

impl std::fmt::Debug for IterationHistory<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IterationHistory")
            .field("iterates", &self.iterates.len())
            .field("step_norms", &self.step_norms)
            .field("residuals", &self.residuals)
            .field("ball_distances", &self.ball_distances)
            .finish()
    }
}

impl<'g> IterationHistory<'g> {
    /// CSV rows `n,step_norm,residual,ball_distance`; the step norm on row
    /// `n` is the norm of the step that produced iterate `n` (zero for the
    /// linear solution).
    pub fn csv_rows(&self) -> Vec<String> {
        let mut out = vec!["n,step_norm,residual,ball_distance".to_string()];
        for n in 0..self.residuals.len().max(self.step_norms.len() + 1) {
            let step = if n == 0 { 0.0 } else { self.step_norms.get(n - 1).copied().unwrap_or(f64::NAN) };
            out.push(format!(
                "{n},{:.12e},{:.12e},{:.12e}",
                step,
                self.residuals.get(n).copied().unwrap_or(f64::NAN),
                self.ball_distances.get(n).copied().unwrap_or(f64::NAN),
            ));
        }
        out
    }
}

/// Backward-Euler residual of a candidate solution in the discrete norm:
/// for each step, `(u - u_prev)/dt + A u + eps u^M - f` summed with
/// `h^2 dt` weights over interior nodes. Zero (up to solver tolerance) for
/// a converged fixed point.
pub fn semilinear_residual(
    problem: &ParabolicProblem,
    config: &FixedPointConfig,
    sol: &DiscreteSolution,
) -> Result<f64> {
    let grid = problem.grid();
    let dt = sol.dt();
    let n = grid.node_count();
    let mut f_nodes = vec![0.0; n];
    let mut au = vec![0.0; n];
    let mut acc = 0.0;
    for step in 1..sol.len() {
        let t = sol.times()[step];
        let u = sol.snapshot(step);
        let prev = sol.snapshot(step - 1);
        let op = problem.coefficients().operator_at(grid, t)?;
        op.apply(u, &mut au);
        problem.rhs_at(t, &mut f_nodes);
        let mut res_sq = 0.0;
        for &id in grid.interior_ids() {
            let r = (u[id] - prev[id]) / dt + au[id]
                + config.epsilon * u[id].powi(config.power as i32)
                - f_nodes[id];
            res_sq += r * r;
        }
        let h = grid.spacing();
        acc += res_sq * h * h * dt;
    }
    Ok(acc.sqrt())
}

/// Runs the fixed-point iteration `u_{k+1} = L̃⁻¹(f − ε uₖᴹ)` starting from
/// the linear solution `u_0 = L̃⁻¹f`.
pub fn fixed_point_solve<'g>(
    problem: &ParabolicProblem<'g>,
    config: &FixedPointConfig,
    dt: f64,
) -> Result<(DiscreteSolution<'g>, IterationHistory<'g>)> {
    let linear = rothe_solve(problem, dt, Scheme::ImplicitEuler)?;
    fixed_point_solve_from(problem, config, dt, linear)
}

/// Same iteration from a caller-supplied initial iterate, which must be a
/// full-stride march on the problem's grid and time grid. Used to probe
/// uniqueness of the limit inside the containment ball.
pub fn fixed_point_solve_from<'g>(
    problem: &ParabolicProblem<'g>,
    config: &FixedPointConfig,
    dt: f64,
    initial: DiscreteSolution<'g>,
) -> Result<(DiscreteSolution<'g>, IterationHistory<'g>)> {
    require_full_stride(&initial)?;
    if !std::ptr::eq(initial.grid(), problem.grid()) || initial.dt() != dt {
        return Err(Error::Shape(
            "initial iterate must live on the problem's grid and time grid".into(),
        ));
    }
    let grid = problem.grid();
    let linear = rothe_solve(problem, dt, Scheme::ImplicitEuler)?;
    let mut history = IterationHistory {
        step_norms: Vec::new(),
        residuals: vec![semilinear_residual(problem, config, &initial)?],
        ball_distances: vec![difference_evolution_norm(&initial, &linear)?],
        iterates: vec![initial],
    };

    let mut f_nodes = vec![0.0; grid.node_count()];
    for iteration in 1..=config.maxiter {
        let prev = history.iterates.last().expect("history starts with the initial iterate");
        let next = rothe_solve_with(
            grid,
            problem.coefficients(),
            problem.horizon(),
            dt,
            Scheme::ImplicitEuler,
            &mut |t, out| {
                problem.rhs_at(t, &mut f_nodes);
                let snap = prev.snapshot((t / dt).round() as usize);
                for &id in grid.interior_ids() {
                    out[id] = f_nodes[id]
                        - config.epsilon * snap[id].powi(config.power as i32);
                }
            },
        )?;
        let step_norm = difference_evolution_norm(&next, prev)?;
        history.step_norms.push(step_norm);
        history.residuals.push(semilinear_residual(problem, config, &next)?);
        history.ball_distances.push(difference_evolution_norm(&next, &linear)?);
        history.iterates.push(next);

        let k = history.step_norms.len();
        let blowing_up = !step_norm.is_finite()
            || (k >= 3
                && history.step_norms[k - 1] > history.step_norms[k - 2]
                && history.step_norms[k - 2] > history.step_norms[k - 3]);
        if blowing_up {
            return Err(Error::Diverged {
                iterations: iteration,
                context: format!(
                    "fixed-point step norms stopped contracting: {:?}",
                    &history.step_norms
                ),
            });
        }
        if step_norm < config.tol {
            break;
        }
    }
    // Reaching the iteration cap is not an error: the caller gets the last
    // iterate and can judge the history.
    let final_iterate =
        history.iterates.last().expect("history always holds the initial iterate").clone();
    Ok((final_iterate, history))
}

/// Contraction and ball-containment verdict extracted from a history.
#[derive(Debug, Clone, Copy)]
pub struct ContractionReport {
    /// Worst ratio of consecutive step norms; zero when fewer than two
    /// steps were taken (nothing to contract).
    pub q: f64,
    pub contractive: bool,
    /// Ball radius from the config.
    pub radius: f64,
    pub max_ball_distance: f64,
    pub within_ball: bool,
}

/// Evaluates the empirical contraction factor and whether every iterate
/// stayed inside the ball around the linear solution.
pub fn contraction_and_ball_report(
    history: &IterationHistory,
    config: &FixedPointConfig,
) -> ContractionReport {
    let mut q: f64 = 0.0;
    for w in history.step_norms.windows(2) {
        if w[0] > 0.0 {
            q = q.max(w[1] / w[0]);
        }
    }
    let max_ball_distance =
        history.ball_distances.iter().copied().fold(0.0f64, f64::max);
    let radius = config.radius();
    ContractionReport {
        q,
        contractive: q < 1.0,
        radius,
        max_ball_distance,
        within_ball: max_ball_distance <= radius,
    }
}
