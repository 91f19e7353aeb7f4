use std::f64::consts::PI;
use std::time::Instant;

use badapt_core::besov::{estimate_smoothness, fit_rate, n_term_curve, SmoothnessScale};
use badapt_core::geometry::{make_l_shape, make_square2, make_unit_square};
use badapt_core::grid::MaskedGrid;
use badapt_core::parabolic::{
    coefficient_registry, rhs_registry, rothe_solve_strided, ParabolicProblem, Scheme,
};
use badapt_core::report::hoelder_vector_quotient;
use badapt_core::semilinear::{
    contraction_and_ball_report, data_norm, estimate_inverse_norm, fixed_point_solve,
    semilinear_residual, smallness_check, FixedPointConfig,
};
use badapt_core::wavelet::{forward_2d, WaveletSystem};

fn radial_window(r0: f64, r1: f64) -> impl Fn(f64, f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    move |x: f64, y: f64| {
        let r = (x * x + y * y).sqrt();
        if r <= r0 {
            1.0
        } else if r >= r1 {
            0.0
        } else {
            let t = (r1 - r) / (r1 - r0);
            f(t) / (f(t) + f(1.0 - t))
        }
    }
}

fn survey(name: &str, domain: badapt_core::geometry::PolygonalDomain, level: usize) {
    let start = Instant::now();
    let grid = MaskedGrid::new(domain, level).unwrap();
    let problem = ParabolicProblem::new(
        &grid,
        0.5,
        coefficient_registry("laplace").unwrap(),
        rhs_registry("smooth_compatible").unwrap(),
    )
    .unwrap();
    let sol = rothe_solve_strided(&problem, 1e-3, Scheme::ImplicitEuler, 25).unwrap();
    println!("{name}: solve took {:.1?}, {} snapshots", start.elapsed(), sol.len());
    let system = WaveletSystem::db3();
    let window = radial_window(0.4, 0.8);
    for i in 0..sol.len() {
        let t = sol.times()[i];
        if t <= 0.025 {
            continue;
        }
        let mut win = sol.snapshot(i).to_vec();
        for (id, v) in win.iter_mut().enumerate() {
            let (x, y) = grid.position(id);
            *v *= window(x, y);
        }
        let coeffs = forward_2d(&grid.samples(&win), &system, level - 2).unwrap();
        let sob = estimate_smoothness(&coeffs, 2.0, 2, SmoothnessScale::SobolevLike, None).unwrap();
        let ada_full =
            estimate_smoothness(&coeffs, 2.0, 2, SmoothnessScale::Adaptivity, None).unwrap();
        let ada_tail =
            estimate_smoothness(&coeffs, 2.0, 2, SmoothnessScale::Adaptivity, Some((2, 4))).unwrap();
        println!(
            "{name} t={t:.3}: s_sob={:.3} (r2={:.4}) ada14={:.3} (r2={:.4}) ada24={:.3} (r2={:.4}) gap24={:.3}",
            sob.s,
            sob.r2,
            ada_full.s,
            ada_full.r2,
            ada_tail.s,
            ada_tail.r2,
            ada_tail.s - sob.s
        );
    }
    println!("{name}: total {:.1?}", start.elapsed());
}

#[test]
fn calibrate_headline_gain() {
    survey("l-shape", make_l_shape(), 7);
    survey("square2", make_square2(), 7);
}

fn restrict_to_disk(
    coeffs: &badapt_core::wavelet::WaveletCoefficients,
    center: (f64, f64),
    radius: f64,
    support_center: f64,
) -> badapt_core::wavelet::WaveletCoefficients {
    let entries = coeffs
        .sorted_entries()
        .into_iter()
        .filter(|(id, _)| {
            if id.ty == 0 {
                return true;
            }
            let scale = 0.5f64.powi(id.level as i32);
            let x = (id.k[0] as f64 + support_center) * scale - center.0;
            let y = (id.k[1] as f64 + support_center) * scale - center.1;
            (x * x + y * y).sqrt() <= radius
        })
        .collect();
    badapt_core::wavelet::WaveletCoefficients::from_entries(
        coeffs.dim,
        coeffs.grid_level,
        coeffs.analysis_level,
        &coeffs.system_name,
        entries,
    )
    .unwrap()
}

fn odd_reflection_fill(grid: &MaskedGrid, values: &[f64], edge_curvature: f64) -> Vec<f64> {
    let samples = grid.samples(values);
    let nx = samples.nx;
    let ny = samples.ny;
    let n = nx - 1;
    let h = samples.spacing;
    let (ox, oy) = (samples.origin[0], samples.origin[1]);
    let mut out = values.to_vec();
    let smoothstep = |t: f64| {
        let t = t.clamp(0.0, 1.0);
        t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    };
    for iy in 0..ny {
        for ix in 0..nx {
            let x = ox + ix as f64 * h;
            let y = oy + iy as f64 * h;
            if x <= 0.0 || y >= 0.0 {
                continue;
            }
            let phi = y.atan2(x);
            let w = smoothstep((phi + PI / 3.0) / (PI / 6.0));
            let across_x_axis = -values[(n - iy) * nx + ix] - edge_curvature * y * y;
            let across_y_axis = -values[iy * nx + (n - ix)] - edge_curvature * x * x;
            out[iy * nx + ix] = w * across_x_axis + (1.0 - w) * across_y_axis;
        }
    }
    out
}

#[test]
fn calibrate_local_restriction() {
    let level = 8;
    let system = WaveletSystem::db3();
    for (name, domain) in [("l-shape", make_l_shape()), ("square2", make_square2())] {
        let start = Instant::now();
        let grid = MaskedGrid::new(domain, level).unwrap();
        let problem = ParabolicProblem::new(
            &grid,
            0.5,
            coefficient_registry("laplace").unwrap(),
            rhs_registry("smooth_compatible").unwrap(),
        )
        .unwrap();
        let sol = rothe_solve_strided(&problem, 1e-3, Scheme::ImplicitEuler, 50).unwrap();
        println!("{name}: solve {:.1?}", start.elapsed());
        for i in 1..sol.len() - 1 {
            let t = sol.times()[i];
            let f_t = 16.0 * t * (-2.0 * t).exp();
            let _ = f_t;
            let filled = if name == "l-shape" {
                odd_reflection_fill(&grid, sol.snapshot(i), 0.0)
            } else {
                sol.snapshot(i).to_vec()
            };
            let coeffs = forward_2d(&grid.samples(&filled), &system, 5).unwrap();
            let local = restrict_to_disk(&coeffs, (0.0, 0.0), 0.2, 2.5);
            let win = Some((3usize, 5usize));
            let sob = estimate_smoothness(&local, 2.0, 2, SmoothnessScale::SobolevLike, win).unwrap();
            let ada = estimate_smoothness(&local, 2.0, 2, SmoothnessScale::Adaptivity, win).unwrap();
            println!(
                "{name} t={t:.2}: s_sob={:.3} (r2={:.4}) s_ada={:.3} (r2={:.4}) gap={:+.3} note={:?}",
                sob.s,
                sob.r2,
                ada.s,
                ada.r2,
                ada.s - sob.s,
                ada.note
            );
        }
    }
}

#[test]
fn calibrate_hoelder_stability() {
    let start = Instant::now();
    let grid = MaskedGrid::new(make_l_shape(), 6).unwrap();
    let mut quotients = Vec::new();
    for (dt, stride) in [(1e-3, 25), (5e-4, 50)] {
        let problem = ParabolicProblem::new(
            &grid,
            0.5,
            coefficient_registry("laplace").unwrap(),
            rhs_registry("smooth_compatible").unwrap(),
        )
        .unwrap();
        let sol = rothe_solve_strided(&problem, dt, Scheme::ImplicitEuler, stride).unwrap();
        let h = grid.spacing();
        let series: Vec<(f64, Vec<f64>)> = (0..sol.len())
            .map(|i| (sol.times()[i], sol.snapshot(i).iter().map(|v| v * h).collect()))
            .collect();
        let q = hoelder_vector_quotient(&series, 0.5).unwrap();
        println!("dt={dt}: vector quotient = {q:.6e} ({:.1?})", start.elapsed());
        quotients.push(q);
    }
    println!(
        "relative change under halving = {:.4}",
        (quotients[1] - quotients[0]).abs() / quotients[0]
    );
}

#[test]
fn calibrate_fixed_point_q_halving() {
    let start = Instant::now();
    let grid = MaskedGrid::new(make_unit_square(), 5).unwrap();
    let dt = 1.0 / 256.0;
    let horizon = 0.25;
    let mut qs = Vec::new();
    for epsilon in [1e-3, 5e-4] {
        let problem = ParabolicProblem::new(
            &grid,
            horizon,
            coefficient_registry("laplace").unwrap(),
            rhs_registry("smooth_compatible").unwrap(),
        )
        .unwrap();
        let opnorm = estimate_inverse_norm(&problem, dt, 3).unwrap();
        let eta =
            data_norm(&grid, &rhs_registry("smooth_compatible").unwrap(), horizon, dt, 1).unwrap();
        let config = FixedPointConfig::new(epsilon, 2, 2.0, eta, opnorm)
            .unwrap()
            .with_stopping(2e-8, 25)
            .unwrap();
        let small = smallness_check(&config);
        let (sol, history) = fixed_point_solve(&problem, &config, dt).unwrap();
        let contraction = contraction_and_ball_report(&history, &config);
        let residual = semilinear_residual(&problem, &config, &sol).unwrap();
        println!(
            "eps={epsilon}: opnorm={opnorm:.4} eta={eta:.4} q={:.6e} iters={} small_pass={} \
             branch={:?} residual={residual:.3e} bound={:.3e} within_ball={} ({:.1?})",
            contraction.q,
            history.iterates.len(),
            small.pass,
            small.branch,
            10.0 * config.tol * (1.0 + opnorm),
            contraction.within_ball,
            start.elapsed()
        );
        qs.push(contraction.q);
    }
    println!("q ratio under eps halving = {:.4}", qs[1] / qs[0]);
}
