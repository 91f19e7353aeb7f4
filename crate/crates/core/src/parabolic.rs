//! Implicit time-marching for linear second-order parabolic problems on
//! masked grids, with coercivity and data-compatibility diagnostics.
//!
//! The continuous problem is `∂ₜu − div(a(t,x)∇u) + c(t,x)u = f` on a
//! polygonal domain with zero initial data and zero Dirichlet boundary
//! values. Each time step solves one elliptic system with the flux-form
//! discretization from [`crate::grid`]; marching is the Rothe viewpoint of
//! treating the evolution as a sequence of elliptic solves.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::grid::{conjugate_gradient, EllipticOperator, MaskedGrid};
use crate::kondratiev::GridFunction;
use crate::Result;

/// Relative residual target for the per-step conjugate-gradient solves.
pub const STEP_SOLVE_TOL: f64 = 1e-10;

/// Iteration cap for the per-step solves; hitting it is reported as solver
/// stagnation.
pub const STEP_SOLVE_MAX_ITER: usize = 20_000;

/// Scalar field on the space-time cylinder, `(t, x, y) ↦ value`.
pub type SpaceTimeFn = Box<dyn Fn(f64, f64, f64) -> f64>;

/// Diffusion and reaction coefficients of the divergence-form operator.
/// Principal coefficients are diagonal; `react` must be nonnegative.
pub struct CoefficientSet {
    pub a11: SpaceTimeFn,
    pub a22: SpaceTimeFn,
    pub react: SpaceTimeFn,
}

impl CoefficientSet {
    /// Time-independent isotropic diffusion with reaction.
    pub fn constant(diffusion: f64, react: f64) -> CoefficientSet {
        CoefficientSet {
            a11: Box::new(move |_, _, _| diffusion),
            a22: Box::new(move |_, _, _| diffusion),
            react: Box::new(move |_, _, _| react),
        }
    }

    /// Builds the frozen-time elliptic operator; fails when a sampled
    /// coefficient violates positivity.
    pub fn operator_at<'g>(&self, grid: &'g MaskedGrid, t: f64) -> Result<EllipticOperator<'g>> {
        EllipticOperator::new(
            grid,
            &|x, y| (self.a11)(t, x, y),
            &|x, y| (self.a22)(t, x, y),
            &|x, y| (self.react)(t, x, y),
        )
    }
}

/// Named coefficient sets used by configs and tests.
pub fn coefficient_registry(name: &str) -> Result<CoefficientSet> {
    match name {
        "laplace" => Ok(CoefficientSet::constant(1.0, 0.0)),
        "double" => Ok(CoefficientSet::constant(2.0, 0.0)),
        "time_ramp" => Ok(CoefficientSet {
            a11: Box::new(|t, _, _| 1.0 + 0.5 * t),
            a22: Box::new(|t, _, _| 1.0 + 0.5 * t),
            react: Box::new(|_, _, _| 0.0),
        }),
        other => Err(Error::Config(format!(
            "unknown coefficient set '{other}'; available: laplace, double, time_ramp"
        ))),
    }
}

/// Named right-hand sides used by configs and tests.
///
/// `smooth_compatible` vanishes at `t = 0` (compatible zero-order data jet)
/// and is nonnegative; `mms` pairs with [`manufactured_solution`].
pub fn rhs_registry(name: &str) -> Result<SpaceTimeFn> {
    match name {
        "zero" => Ok(Box::new(|_, _, _| 0.0)),
        "smooth_compatible" => Ok(Box::new(|t, _, _| 16.0 * t * (-2.0 * t).exp())),
        "mms" => Ok(Box::new(|t, x, y| {
            let pi = std::f64::consts::PI;
            (1.0 + 2.0 * pi * pi * t) * (pi * x).sin() * (pi * y).sin()
        })),
        other => Err(Error::Config(format!(
            "unknown right-hand side '{other}'; available: zero, smooth_compatible, mms"
        ))),
    }
}

/// Exact solution paired with the `mms` right-hand side on the unit square:
/// `u(t, x, y) = t sin(πx) sin(πy)`.
pub fn manufactured_solution() -> SpaceTimeFn {
    Box::new(|t, x, y| {
        let pi = std::f64::consts::PI;
        t * (pi * x).sin() * (pi * y).sin()
    })
}

/// Time discretization of the marching scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ImplicitEuler,
    CrankNicolson,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::ImplicitEuler => write!(f, "implicit-euler"),
            Scheme::CrankNicolson => write!(f, "crank-nicolson"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit-euler" => Ok(Scheme::ImplicitEuler),
            "crank-nicolson" => Ok(Scheme::CrankNicolson),
            other => Err(Error::Parameter(format!(
                "unknown scheme '{other}'; expected implicit-euler or crank-nicolson"
            ))),
        }
    }
}

/// Linear parabolic problem: grid, final time, coefficients, forcing. Zero
/// initial data and zero Dirichlet boundary values are built in.
pub struct ParabolicProblem<'g> {
    grid: &'g MaskedGrid,
    horizon: f64,
    coefficients: CoefficientSet,
    rhs: SpaceTimeFn,
}

impl<'g> ParabolicProblem<'g> {
    /// Validates the horizon and samples the coefficients for ellipticity at
    /// the initial, middle, and final times.
    pub fn new(
        grid: &'g MaskedGrid,
        horizon: f64,
        coefficients: CoefficientSet,
        rhs: SpaceTimeFn,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Parameter(format!("final time must be positive, got {horizon}")));
        }
        for t in [0.0, 0.5 * horizon, horizon] {
            coefficients.operator_at(grid, t)?;
        }
        Ok(ParabolicProblem { grid, horizon, coefficients, rhs })
    }

    pub fn grid(&self) -> &'g MaskedGrid {
        self.grid
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.coefficients
    }

    /// Fills `out` with the forcing at interior nodes for time `t`; other
    /// entries are zeroed. Only interior values enter the discrete system.
    pub fn rhs_at(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &id in self.grid.interior_ids() {
            let (x, y) = self.grid.position(id);
            out[id] = (self.rhs)(t, x, y);
        }
    }
}

/// Time-stamped nodal snapshots of a march. With a stride greater than one,
/// only every stride-th step (plus the final one) is retained; the full step
/// count is kept for bookkeeping.
#[derive(Clone)]
pub struct DiscreteSolution<'g> {
    grid: &'g MaskedGrid,
    scheme: Scheme,
    dt: f64,
    steps_total: usize,
    times: Vec<f64>,
    snapshots: Vec<Vec<f64>>,
}

impl std::fmt::Debug for DiscreteSolution<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteSolution")
            .field("scheme", &self.scheme)
            .field("dt", &self.dt)
            .field("steps_total", &self.steps_total)
            .field("retained", &self.snapshots.len())
            .finish()
    }
}

impl<'g> DiscreteSolution<'g> {
    pub fn grid(&self) -> &'g MaskedGrid {
        self.grid
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Grid spacing of the underlying mask.
    pub fn h(&self) -> f64 {
        self.grid.spacing()
    }

    /// Number of time steps the march performed, independent of the stride.
    pub fn steps_total(&self) -> usize {
        self.steps_total
    }

    /// Number of retained snapshots.
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshot(&self, i: usize) -> &[f64] {
        &self.snapshots[i]
    }

    pub fn final_snapshot(&self) -> &[f64] {
        self.snapshots.last().expect("a march always records at least the initial snapshot")
    }

    /// Wraps a retained snapshot for the weighted-norm and wavelet pipelines.
    pub fn grid_function(&self, i: usize) -> Result<GridFunction<'g>> {
        if i >= self.snapshots.len() {
            return Err(Error::IndexOutOfRange { index: i, context: "solution snapshot".into() });
        }
        GridFunction::from_values(self.grid, self.snapshots[i].clone())
    }

    /// Discrete L2 norms of every retained snapshot.
    pub fn l2_norms(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| self.grid.l2_norm(s)).collect()
    }
}

fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
    }
    let ratio = horizon / dt;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-8 * ratio.max(1.0) {
        return Err(Error::Parameter(format!(
            "final time {horizon} must be an integer multiple of the step {dt}"
        )));
    }
    Ok(steps as usize)
}

/// Advances the march with a caller-supplied nodal forcing and hands every
/// state to `observer` as `(step index, time, nodal values)`, starting with
/// the zero state at `t = 0`. This is the memory-frugal core: nothing is
/// retained here. The forcing closure must fill the interior entries of its
/// output buffer for the requested time; other entries are pre-zeroed.
///
/// Implicit Euler solves `(I + Δt A(tⁿ⁺¹)) uⁿ⁺¹ = uⁿ + Δt f(tⁿ⁺¹)`;
/// Crank–Nicolson solves
/// `(I + Δt/2 A(tⁿ⁺¹)) uⁿ⁺¹ = (I − Δt/2 A(tⁿ)) uⁿ + Δt f(tⁿ⁺¹ᐟ²)`.
pub fn rothe_march_with(
    grid: &MaskedGrid,
    coefficients: &CoefficientSet,
    horizon: f64,
    dt: f64,
    scheme: Scheme,
    rhs_nodes: &mut dyn FnMut(f64, &mut [f64]),
    observer: &mut dyn FnMut(usize, f64, &[f64]),
) -> Result<()> {
    let steps = step_count(horizon, dt)?;
    let n = grid.node_count();
    let mut u = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut f_nodes = vec![0.0; n];
    let mut work = vec![0.0; n];
    observer(0, 0.0, &u);

    let mut op_curr = coefficients.operator_at(grid, 0.0)?;
    for step in 1..=steps {
        let t_next = step as f64 * dt;
        let op_next = coefficients.operator_at(grid, t_next)?;
        f_nodes.iter_mut().for_each(|v| *v = 0.0);
        match scheme {
            Scheme::ImplicitEuler => {
                rhs_nodes(t_next, &mut f_nodes);
                for &id in grid.interior_ids() {
                    b[id] = u[id] + dt * f_nodes[id];
                }
            }
            Scheme::CrankNicolson => {
                rhs_nodes(t_next - 0.5 * dt, &mut f_nodes);
                op_curr.apply(&u, &mut work);
                for &id in grid.interior_ids() {
                    b[id] = u[id] - 0.5 * dt * work[id] + dt * f_nodes[id];
                }
            }
        }
        let weight = match scheme {
            Scheme::ImplicitEuler => dt,
            Scheme::CrankNicolson => 0.5 * dt,
        };
        let apply = |v: &[f64], out: &mut [f64]| {
            op_next.apply(v, out);
            for &id in grid.interior_ids() {
                out[id] = v[id] + weight * out[id];
            }
        };
        let (next, _iters) =
            conjugate_gradient(grid, &apply, &b, Some(&u), STEP_SOLVE_TOL, STEP_SOLVE_MAX_ITER)
                .map_err(|e| {
                    Error::Solver(format!("time step {step} at t = {t_next}: {e}"))
                })?;
        u = next;
        observer(step, t_next, &u);
        op_curr = op_next;
    }
    Ok(())
}

/// Advances the march using the problem's own forcing; see
/// [`rothe_march_with`] for the stepping details.
pub fn rothe_march(
    problem: &ParabolicProblem,
    dt: f64,
    scheme: Scheme,
    observer: &mut dyn FnMut(usize, f64, &[f64]),
) -> Result<()> {
    rothe_march_with(
        problem.grid(),
        problem.coefficients(),
        problem.horizon(),
        dt,
        scheme,
        &mut |t, out| problem.rhs_at(t, out),
        observer,
    )
}

/// Runs the march with a caller-supplied nodal forcing, retaining every
/// snapshot. This is the entry point for solvers that modify the forcing
/// per run, such as the semilinear fixed-point iteration.
pub fn rothe_solve_with<'g>(
    grid: &'g MaskedGrid,
    coefficients: &CoefficientSet,
    horizon: f64,
    dt: f64,
    scheme: Scheme,
    rhs_nodes: &mut dyn FnMut(f64, &mut [f64]),
) -> Result<DiscreteSolution<'g>> {
    let steps = step_count(horizon, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::with_capacity(steps + 1);
    rothe_march_with(grid, coefficients, horizon, dt, scheme, rhs_nodes, &mut |_, t, u| {
        times.push(t);
        snapshots.push(u.to_vec());
    })?;
    Ok(DiscreteSolution { grid, scheme, dt, steps_total: steps, times, snapshots })
}

/// Runs the march and retains every snapshot.
pub fn rothe_solve<'g>(
    problem: &ParabolicProblem<'g>,
    dt: f64,
    scheme: Scheme,
) -> Result<DiscreteSolution<'g>> {
    rothe_solve_strided(problem, dt, scheme, 1)
}

/// Runs the march retaining every `stride`-th snapshot plus the final one.
pub fn rothe_solve_strided<'g>(
    problem: &ParabolicProblem<'g>,
    dt: f64,
    scheme: Scheme,
    stride: usize,
) -> Result<DiscreteSolution<'g>> {
    if stride == 0 {
        return Err(Error::Parameter("snapshot stride must be at least 1".into()));
    }
    let steps = step_count(problem.horizon(), dt)?;
    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    rothe_march(problem, dt, scheme, &mut |step, t, u| {
        if step % stride == 0 || step == steps {
            times.push(t);
            snapshots.push(u.to_vec());
        }
    })?;
    Ok(DiscreteSolution { grid: problem.grid(), scheme, dt, steps_total: steps, times, snapshots })
}

/// Coercivity estimate: the smallest discrete Rayleigh quotient found and
/// the sample time where it occurred.
#[derive(Debug, Clone, Copy)]
pub struct CoercivityEstimate {
    pub mu: f64,
    pub at_time: f64,
}

/// Smallest sampled value of `B(t, u, u) / (‖u‖² + |u|²)` over a fixed
/// seeded probe family and `sample_count` uniformly spaced times, where `B`
/// is the discrete bilinear form of the operator and the denominator is the
/// squared discrete H¹ norm.
///
/// The probes span both ends of the frequency range: the four lowest
/// Dirichlet box modes (the first of which minimizes the quotient for the
/// isotropic Laplacian), random low-frequency mode mixtures, and rough
/// nodal noise. All probes vanish at boundary and exterior nodes.
pub fn coercivity_margin(problem: &ParabolicProblem, sample_count: usize) -> Result<CoercivityEstimate> {
    if sample_count == 0 {
        return Err(Error::Parameter("coercivity sampling needs at least one time".into()));
    }
    let grid = problem.grid();
    let (lo, hi) = grid.domain().bounding_box();
    let (wx, wy) = (hi.x - lo.x, hi.y - lo.y);
    let pi = std::f64::consts::PI;
    let mode = |k: usize, l: usize| -> Vec<f64> {
        grid.project_interior(|x, y| {
            (k as f64 * pi * (x - lo.x) / wx).sin() * (l as f64 * pi * (y - lo.y) / wy).sin()
        })
    };

    let mut probes: Vec<Vec<f64>> = vec![mode(1, 1), mode(1, 2), mode(2, 1), mode(2, 2)];
    let mut rng = ChaCha8Rng::seed_from_u64(0x436f_6572);
    for _ in 0..4 {
        let coeffs: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        probes.push(grid.project_interior(|x, y| {
            let mut acc = 0.0;
            for k in 1..=4usize {
                for l in 1..=4usize {
                    acc += coeffs[(k - 1) * 4 + (l - 1)]
                        * (k as f64 * pi * (x - lo.x) / wx).sin()
                        * (l as f64 * pi * (y - lo.y) / wy).sin();
                }
            }
            acc
        }));
    }
    for _ in 0..4 {
        let mut noise = vec![0.0; grid.node_count()];
        for &id in grid.interior_ids() {
            noise[id] = rng.gen_range(-1.0..1.0);
        }
        probes.push(noise);
    }

    let h2 = grid.spacing() * grid.spacing();
    let mut best = f64::INFINITY;
    let mut best_time = 0.0;
    let mut au = vec![0.0; grid.node_count()];
    for j in 0..sample_count {
        let t = if sample_count == 1 {
            0.0
        } else {
            problem.horizon() * j as f64 / (sample_count - 1) as f64
        };
        let op = problem.coefficients().operator_at(grid, t)?;
        for u in &probes {
            op.apply(u, &mut au);
            let form = grid.dot_interior(&au, u) * h2;
            let l2 = grid.l2_norm(u);
            let h1 = grid.h1_seminorm(u);
            let denom = l2 * l2 + h1 * h1;
            if denom == 0.0 {
                continue;
            }
            let q = form / denom;
            if q < best {
                best = q;
                best_time = t;
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::InsufficientData("no usable coercivity probe on this grid".into()));
    }
    Ok(CoercivityEstimate { mu: best, at_time: best_time })
}

/// Discrete L2 norms of the time-derivative jets `∂ₜᵏ f(0, ·)` for
/// `k = 0..=jet_order`, estimated by one-sided finite differences with
/// probe spacing `dt`. Supports jets up to order 2.
pub fn compatibility_residuals(
    grid: &MaskedGrid,
    f: &SpaceTimeFn,
    jet_order: usize,
    dt: f64,
) -> Result<Vec<f64>> {
    if jet_order > 2 {
        return Err(Error::Parameter(format!(
            "time-derivative jets are implemented up to order 2, requested {jet_order}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Parameter(format!("probe spacing must be positive, got {dt}")));
    }
    let sample = |t: f64| grid.project(|x, y| f(t, x, y));
    let f0 = sample(0.0);
    let mut out = vec![grid.l2_norm(&f0)];
    if jet_order >= 1 {
        let f1 = sample(dt);
        let f2 = sample(2.0 * dt);
        let jet1: Vec<f64> = f0
            .iter()
            .zip(&f1)
            .zip(&f2)
            .map(|((a, b), c)| (-3.0 * a + 4.0 * b - c) / (2.0 * dt))
            .collect();
        out.push(grid.l2_norm(&jet1));
        if jet_order == 2 {
            let f3 = sample(3.0 * dt);
            let jet2: Vec<f64> = (0..f0.len())
                .map(|i| (2.0 * f0[i] - 5.0 * f1[i] + 4.0 * f2[i] - f3[i]) / (dt * dt))
                .collect();
            out.push(grid.l2_norm(&jet2));
        }
    }
    Ok(out)
}

/// Per-step and aggregate errors of a march against a manufactured
/// solution.
#[derive(Debug, Clone)]
pub struct ErrorTable {
    /// `(time, L2 error)` at every step.
    pub per_step: Vec<(f64, f64)>,
    pub max_error: f64,
    pub l2_in_time_error: f64,
}

/// Marches the problem and measures discrete L2 errors against `exact` at
/// every step. The manufactured solution must honor the built-in zero
/// initial and boundary data.
pub fn mms_error(
    problem: &ParabolicProblem,
    exact: &SpaceTimeFn,
    dt: f64,
    scheme: Scheme,
) -> Result<ErrorTable> {
    let grid = problem.grid();
    for id in 0..grid.node_count() {
        let (x, y) = grid.position(id);
        if exact(0.0, x, y).abs() > 1e-12 {
            return Err(Error::Parameter(format!(
                "manufactured solution must vanish at t = 0, found {} at ({x}, {y})",
                exact(0.0, x, y)
            )));
        }
    }
    for id in 0..grid.node_count() {
        if grid.class(id) != crate::grid::NodeClass::Boundary {
            continue;
        }
        let (x, y) = grid.position(id);
        for t in [0.5 * problem.horizon(), problem.horizon()] {
            if exact(t, x, y).abs() > 1e-12 {
                return Err(Error::Parameter(format!(
                    "manufactured solution must vanish on the boundary, found {} at ({x}, {y}, t={t})",
                    exact(t, x, y)
                )));
            }
        }
    }

    let mut per_step = Vec::new();
    let mut diff = vec![0.0; grid.node_count()];
    rothe_march(problem, dt, scheme, &mut |_, t, u| {
        for id in 0..u.len() {
            let (x, y) = grid.position(id);
            diff[id] = u[id] - exact(t, x, y);
        }
        per_step.push((t, grid.l2_norm(&diff)));
    })?;
    let max_error = per_step.iter().map(|p| p.1).fold(0.0f64, f64::max);
    let l2_in_time_error =
        (per_step.iter().skip(1).map(|p| p.1 * p.1 * dt).sum::<f64>()).sqrt();
    Ok(ErrorTable { per_step, max_error, l2_in_time_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_l_shape, make_unit_square};

    fn unit_grid(level: usize) -> MaskedGrid {
        MaskedGrid::new(make_unit_square(), level).unwrap()
    }

    fn l_grid(level: usize) -> MaskedGrid {
        MaskedGrid::new(make_l_shape(), level).unwrap()
    }

    #[test]
    fn zero_forcing_keeps_the_solution_identically_zero() {
        let grid = l_grid(4);
        for scheme in [Scheme::ImplicitEuler, Scheme::CrankNicolson] {
            let problem = ParabolicProblem::new(
                &grid,
                0.1,
                coefficient_registry("laplace").unwrap(),
                rhs_registry("zero").unwrap(),
            )
            .unwrap();
            let sol = rothe_solve(&problem, 0.01, scheme).unwrap();
            assert_eq!(sol.len(), 11, "initial state plus ten steps");
            for i in 0..sol.len() {
                assert_eq!(
                    grid.linf_norm(sol.snapshot(i)),
                    0.0,
                    "zero data must produce the zero solution ({scheme}, step {i})"
                );
            }
        }
    }

    #[test]
    fn manufactured_solution_converges_at_second_order_in_space() {
        // u = t sin(πx) sin(πy) is linear in time, so implicit Euler commits
        // no temporal error and the measured decay is the pure spatial order.
        let exact = manufactured_solution();
        let mut errors = Vec::new();
        for level in [4usize, 5, 6] {
            let grid = unit_grid(level);
            let h = grid.spacing();
            let problem = ParabolicProblem::new(
                &grid,
                0.25,
                coefficient_registry("laplace").unwrap(),
                rhs_registry("mms").unwrap(),
            )
            .unwrap();
            let table = mms_error(&problem, &exact, h * h, Scheme::ImplicitEuler).unwrap();
            errors.push(table.max_error);
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(
                order >= 1.9,
                "spatial convergence order {order} below 1.9 (errors {errors:?})"
            );
            assert!(w[0] / w[1] >= 3.6, "halving h must shrink the error by at least 3.6x");
        }
    }

    #[test]
    fn crank_nicolson_converges_at_second_order_in_time() {
        let pi = std::f64::consts::PI;
        let exact: SpaceTimeFn = Box::new(move |t, x, y| t.sin() * (pi * x).sin() * (pi * y).sin());
        let mut errors = Vec::new();
        for level in [4usize, 5, 6] {
            let grid = unit_grid(level);
            let dt = 0.5 * grid.spacing();
            let rhs: SpaceTimeFn = Box::new(move |t, x, y| {
                (t.cos() + 2.0 * pi * pi * t.sin()) * (pi * x).sin() * (pi * y).sin()
            });
            let problem = ParabolicProblem::new(
                &grid,
                0.5,
                coefficient_registry("laplace").unwrap(),
                rhs,
            )
            .unwrap();
            let table = mms_error(&problem, &exact, dt, Scheme::CrankNicolson).unwrap();
            errors.push(table.max_error);
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "temporal order {order} below 1.9 (errors {errors:?})");
        }
    }

    #[test]
    fn nonnegative_forcing_respects_the_discrete_maximum_principle() {
        let grid = l_grid(4);
        let problem = ParabolicProblem::new(
            &grid,
            0.5,
            coefficient_registry("laplace").unwrap(),
            rhs_registry("smooth_compatible").unwrap(),
        )
        .unwrap();
        let sol = rothe_solve(&problem, 0.01, Scheme::ImplicitEuler).unwrap();
        let mut min = f64::INFINITY;
        for i in 0..sol.len() {
            min = sol.snapshot(i).iter().fold(min, |m, &v| m.min(v));
        }
        assert!(min >= -1e-12, "nonnegative forcing must keep the solution above -1e-12, got {min}");
    }

    #[test]
    fn energy_decays_after_the_forcing_is_switched_off() {
        let pi = std::f64::consts::PI;
        let grid = unit_grid(4);
        let cutoff = 0.1;
        let rhs: SpaceTimeFn = Box::new(move |t, x, y| {
            if t <= cutoff {
                (pi * x).sin() * (pi * y).sin()
            } else {
                0.0
            }
        });
        let problem =
            ParabolicProblem::new(&grid, 0.4, coefficient_registry("laplace").unwrap(), rhs)
                .unwrap();
        let sol = rothe_solve(&problem, 0.01, Scheme::ImplicitEuler).unwrap();
        let norms = sol.l2_norms();
        let start = (cutoff / 0.01) as usize + 1;
        assert!(norms[start] > 0.0, "warm start must leave energy in the system");
        for i in start..norms.len() - 1 {
            assert!(
                norms[i + 1] <= norms[i] * (1.0 + 1e-13),
                "free decay must be monotone: step {i} has {} then {}",
                norms[i],
                norms[i + 1]
            );
        }
    }

    #[test]
    fn step_operator_is_symmetric_and_solution_is_bounded_by_data() {
        let grid = unit_grid(4);
        let coeffs = coefficient_registry("time_ramp").unwrap();
        let op = coeffs.operator_at(&grid, 0.3).unwrap();
        let dt = 0.01;
        let apply = |v: &[f64], out: &mut [f64]| {
            op.apply(v, out);
            for &id in grid.interior_ids() {
                out[id] = v[id] + dt * out[id];
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut u = vec![0.0; grid.node_count()];
        let mut v = vec![0.0; grid.node_count()];
        for &id in grid.interior_ids() {
            u[id] = rng.gen_range(-1.0..1.0);
            v[id] = rng.gen_range(-1.0..1.0);
        }
        let mut su = vec![0.0; grid.node_count()];
        let mut sv = vec![0.0; grid.node_count()];
        apply(&u, &mut su);
        apply(&v, &mut sv);
        let lhs = grid.dot_interior(&su, &v);
        let rhs = grid.dot_interior(&u, &sv);
        assert!(
            (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
            "step operator must be symmetric: {lhs} vs {rhs}"
        );

        // The energy norm of the solution over time is controlled by the
        // data norm, with a constant stable under refinement.
        let mut ratios = Vec::new();
        for (level, dt) in [(4usize, 2e-3), (5usize, 1e-3)] {
            let grid = unit_grid(level);
            let problem = ParabolicProblem::new(
                &grid,
                0.25,
                coefficient_registry("laplace").unwrap(),
                rhs_registry("smooth_compatible").unwrap(),
            )
            .unwrap();
            let sol = rothe_solve(&problem, dt, Scheme::ImplicitEuler).unwrap();
            let mut energy = 0.0;
            let mut data = 0.0;
            let mut f_nodes = vec![0.0; grid.node_count()];
            for i in 1..sol.len() {
                let u = sol.snapshot(i);
                let l2 = grid.l2_norm(u);
                let h1 = grid.h1_seminorm(u);
                energy += (l2 * l2 + h1 * h1) * dt;
                problem.rhs_at(sol.times()[i], &mut f_nodes);
                let fl2 = grid.l2_norm(&f_nodes);
                data += fl2 * fl2 * dt;
            }
            ratios.push((energy.sqrt() / data.sqrt(), level));
        }
        let (r0, r1) = (ratios[0].0, ratios[1].0);
        assert!(r0.is_finite() && r1.is_finite() && r0 > 0.0);
        assert!(
            (r0 - r1).abs() / r0 < 0.25,
            "stability constant must be refinement-stable: {r0} vs {r1}"
        );
    }

    #[test]
    fn coercivity_margin_matches_the_eigenvalue_oracle() {
        let grid = unit_grid(5);
        let problem = ParabolicProblem::new(
            &grid,
            1.0,
            coefficient_registry("laplace").unwrap(),
            rhs_registry("zero").unwrap(),
        )
        .unwrap();
        let est = coercivity_margin(&problem, 3).unwrap();
        assert!(est.mu > 0.0, "coercivity margin must be positive");

        // For the Laplacian the quotient is minimized by the lowest grid
        // mode, where it equals λ/(1+λ) with λ the smallest operator
        // eigenvalue; that value is also a lower bound over all probes.
        let op = problem.coefficients().operator_at(&grid, 0.0).unwrap();
        let lambda = crate::grid::smallest_eigenvalue(&op, 30).unwrap();
        let oracle = lambda / (1.0 + lambda);
        assert!(
            (est.mu - oracle).abs() <= 1e-6 * oracle,
            "estimate {} must match the eigenvalue oracle {oracle}",
            est.mu
        );
        let continuum = 1.0 / (1.0 + 1.0 / (2.0 * std::f64::consts::PI.powi(2)));
        assert!(est.mu >= 0.95 * continuum, "estimate must sit near the continuum bound");

        // Doubling the coefficients doubles every probe quotient exactly.
        let doubled = ParabolicProblem::new(
            &grid,
            1.0,
            coefficient_registry("double").unwrap(),
            rhs_registry("zero").unwrap(),
        )
        .unwrap();
        let est2 = coercivity_margin(&doubled, 3).unwrap();
        assert!(
            (est2.mu / est.mu - 2.0).abs() < 1e-12,
            "doubled coefficients must double the margin: {} vs {}",
            est2.mu,
            est.mu
        );

        // Increasing-in-time coefficients put the minimum at the start.
        let ramp = ParabolicProblem::new(
            &grid,
            1.0,
            coefficient_registry("time_ramp").unwrap(),
            rhs_registry("zero").unwrap(),
        )
        .unwrap();
        let est3 = coercivity_margin(&ramp, 5).unwrap();
        assert_eq!(est3.at_time, 0.0, "monotone coefficients minimize the quotient at t = 0");
    }

    #[test]
    fn compatibility_residuals_detect_vanishing_jets() {
        let pi = std::f64::consts::PI;
        let grid = unit_grid(4);
        let g = grid.project(|x, y| (pi * x).sin() * (pi * y).sin());
        let g_norm = grid.l2_norm(&g);

        let quadratic: SpaceTimeFn =
            Box::new(move |t, x, y| t * t * (pi * x).sin() * (pi * y).sin());
        let res = compatibility_residuals(&grid, &quadratic, 1, 1e-3).unwrap();
        assert!(res[0] < 1e-8 && res[1] < 1e-8, "t² data has vanishing jets 0 and 1: {res:?}");

        let constant: SpaceTimeFn = Box::new(move |_, x, y| (pi * x).sin() * (pi * y).sin());
        let res = compatibility_residuals(&grid, &constant, 0, 1e-3).unwrap();
        assert!(
            (res[0] - g_norm).abs() < 1e-12,
            "constant-in-time data has zeroth jet ‖g‖: {} vs {g_norm}",
            res[0]
        );

        let sinusoid: SpaceTimeFn =
            Box::new(move |t, x, y| t.sin() * (pi * x).sin() * (pi * y).sin());
        let res = compatibility_residuals(&grid, &sinusoid, 2, 1e-3).unwrap();
        assert!(res[0] < 1e-12, "sin(t) vanishes at t = 0");
        assert!(
            (res[1] - g_norm).abs() < 1e-5 * g_norm,
            "first jet of sin(t)·g is ‖g‖: {} vs {g_norm}",
            res[1]
        );
        assert!(res[2] < 1e-2 * g_norm, "second jet of sin(t)·g vanishes: {}", res[2]);

        assert!(compatibility_residuals(&grid, &constant, 3, 1e-3).is_err());
        assert!(compatibility_residuals(&grid, &constant, 0, -1.0).is_err());
    }

    #[test]
    fn mms_harness_validates_setup_and_reports_zero_for_zero_data() {
        let grid = unit_grid(4);
        let problem = ParabolicProblem::new(
            &grid,
            0.1,
            coefficient_registry("laplace").unwrap(),
            rhs_registry("zero").unwrap(),
        )
        .unwrap();
        let zero: SpaceTimeFn = Box::new(|_, _, _| 0.0);
        let table = mms_error(&problem, &zero, 0.01, Scheme::ImplicitEuler).unwrap();
        assert_eq!(table.max_error, 0.0, "zero data and zero exact solution give zero error");
        assert_eq!(table.l2_in_time_error, 0.0);
        assert_eq!(table.per_step.len(), 11);

        let bad_boundary: SpaceTimeFn = Box::new(|t, x, _| t * x);
        assert!(
            matches!(
                mms_error(&problem, &bad_boundary, 0.01, Scheme::ImplicitEuler),
                Err(Error::Parameter(_))
            ),
            "exact solution violating boundary data must be rejected"
        );
        let bad_initial: SpaceTimeFn = Box::new(|_, x, y| {
            let pi = std::f64::consts::PI;
            (pi * x).sin() * (pi * y).sin()
        });
        assert!(matches!(
            mms_error(&problem, &bad_initial, 0.01, Scheme::ImplicitEuler),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn strided_solutions_subsample_the_same_march() {
        let grid = unit_grid(4);
        let make_problem = || {
            ParabolicProblem::new(
                &grid,
                0.2,
                coefficient_registry("laplace").unwrap(),
                rhs_registry("smooth_compatible").unwrap(),
            )
            .unwrap()
        };
        let full = rothe_solve(&make_problem(), 0.01, Scheme::ImplicitEuler).unwrap();
        let strided = rothe_solve_strided(&make_problem(), 0.01, Scheme::ImplicitEuler, 7).unwrap();
        assert_eq!(full.len(), 21);
        assert_eq!(strided.steps_total(), full.steps_total());
        assert_eq!(
            strided.times(),
            &[0.0, 0.07, 0.14, 0.2],
            "stride 7 keeps steps 0, 7, 14 and the final step 20"
        );
        for (i, &t) in strided.times().iter().enumerate() {
            let j = (t / 0.01).round() as usize;
            assert_eq!(
                strided.snapshot(i),
                full.snapshot(j),
                "strided snapshot at t = {t} must equal the full march's"
            );
        }
        assert!(strided.grid_function(99).is_err(), "out-of-range snapshot index is an error");
    }

    #[test]
    fn invalid_setups_are_rejected() {
        let grid = unit_grid(3);
        assert!(matches!(
            ParabolicProblem::new(
                &grid,
                -1.0,
                coefficient_registry("laplace").unwrap(),
                rhs_registry("zero").unwrap()
            ),
            Err(Error::Parameter(_))
        ));
        let sign_flip = CoefficientSet {
            a11: Box::new(|t, _, _| 1.0 - 3.0 * t),
            a22: Box::new(|_, _, _| 1.0),
            react: Box::new(|_, _, _| 0.0),
        };
        assert!(
            matches!(
                ParabolicProblem::new(&grid, 1.0, sign_flip, rhs_registry("zero").unwrap()),
                Err(Error::Ellipticity(_))
            ),
            "coefficients losing positivity over time must be caught"
        );
        let problem = ParabolicProblem::new(
            &grid,
            1.0,
            coefficient_registry("laplace").unwrap(),
            rhs_registry("zero").unwrap(),
        )
        .unwrap();
        assert!(matches!(
            rothe_solve(&problem, 0.3, Scheme::ImplicitEuler),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            rothe_solve_strided(&problem, 0.1, Scheme::ImplicitEuler, 0),
            Err(Error::Parameter(_))
        ));
        assert!(coefficient_registry("nope").is_err());
        assert!(rhs_registry("nope").is_err());
        assert!("leapfrog".parse::<Scheme>().is_err());
        assert_eq!("implicit-euler".parse::<Scheme>().unwrap(), Scheme::ImplicitEuler);
        assert_eq!("crank-nicolson".parse::<Scheme>().unwrap(), Scheme::CrankNicolson);
    }
}
