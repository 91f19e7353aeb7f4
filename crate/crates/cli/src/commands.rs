//! Subcommand implementations.
//!
//! Each command runs in two phases: build all inputs from the config
//! (failures are config errors, exit 2), then execute and write artifacts
//! (failures are run errors, exit 3). Results land in the output directory;
//! commands that consume earlier artifacts read them from the input
//! directory, which defaults to the same place.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use badapt_core::besov::{
    adaptivity_norm, besov_quasinorm, estimate_smoothness, fit_rate, n_term_curve,
    AdaptivityScalePoint, BesovParams, SmoothnessScale,
};
use badapt_core::geometry::{
    make_l_shape, make_slit_square, make_square2, make_unit_square, PolygonalDomain,
};
use badapt_core::grid::MaskedGrid;
use badapt_core::kondratiev::{kondratiev_norm, GridFunction, KondratievParams, NormReport};
use badapt_core::model::CornerProfile;
use badapt_core::parabolic::{
    coefficient_registry, rhs_registry, rothe_solve_strided, DiscreteSolution, ParabolicProblem,
    Scheme,
};
use badapt_core::pencil::{
    pencil_spectrum_numeric, weight_admissible, WedgePencil, WeightBudget,
};
use badapt_core::report::{
    hoelder_scalar_quotient, hoelder_vector_quotient, regularity_report, write_two_column,
    RegularityReport, ReportRequest,
};
use badapt_core::semilinear::{
    contraction_and_ball_report, data_norm, estimate_inverse_norm, fixed_point_solve,
    semilinear_residual, smallness_check, FixedPointConfig,
};
use badapt_core::wavelet::{
    forward_2d, read_coefficients_csv, write_coefficients_csv, WaveletCoefficients, WaveletSystem,
};
use badapt_core::Error;

use crate::artifacts::{self, IndexRow, RunMeta};
use crate::config::{default_counts, ExperimentConfig, DEFAULT_WAVELET_ORDER};
use crate::CliError;

fn cfg_err(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

fn domain_by_name(name: &str) -> Result<PolygonalDomain, CliError> {
    match name {
        "l-shape" => Ok(make_l_shape()),
        "unit-square" => Ok(make_unit_square()),
        "square2" => Ok(make_square2()),
        "slit-square" => Ok(make_slit_square()),
        other => Err(CliError::Config(format!(
            "unknown domain \"{other}\"; expected l-shape, unit-square, square2, or slit-square"
        ))),
    }
}

struct SolveInputs {
    domain_name: String,
    grid: MaskedGrid,
    horizon: f64,
    dt: f64,
    scheme: Scheme,
    coefficients: String,
    rhs: String,
}

fn solve_inputs(cfg: &ExperimentConfig) -> Result<SolveInputs, CliError> {
    let domain_name = cfg.require_str(&cfg.domain, "domain")?.to_string();
    let domain = domain_by_name(&domain_name)?;
    let level = cfg.require(cfg.grid_level, "grid_level")?;
    let grid = MaskedGrid::new(domain, level).map_err(cfg_err)?;
    let horizon = cfg.require(cfg.horizon_time, "horizon_time")?;
    let dt = cfg.require(cfg.step_dt, "step_dt")?;
    let scheme: Scheme =
        cfg.scheme.as_deref().unwrap_or("implicit-euler").parse().map_err(cfg_err)?;
    Ok(SolveInputs {
        domain_name,
        grid,
        horizon,
        dt,
        scheme,
        coefficients: cfg.coefficients.clone().unwrap_or_else(|| "laplace".into()),
        rhs: cfg.rhs.clone().unwrap_or_else(|| "zero".into()),
    })
}

/// Default retention: about 20 evenly spaced snapshots plus the endpoint.
fn default_stride(steps: usize) -> usize {
    (steps / 20).max(1)
}

/// Writes norms and a strided subset of snapshots for a stored solution.
fn write_solution(out: &Path, sol: &DiscreteSolution, file_stride: usize) -> Result<(), Error> {
    let norms = sol.l2_norms();
    let rows: Vec<(usize, f64, f64)> = sol
        .times()
        .iter()
        .zip(&norms)
        .enumerate()
        .map(|(i, (&t, &n))| (i, t, n))
        .collect();
    artifacts::write_norms(out, &rows)?;
    let pairs: Vec<(f64, f64)> = rows.iter().map(|&(_, t, n)| (t, n)).collect();
    let mut w = artifacts::create(out, "norms.dat")?;
    write_two_column(&mut w, &pairs, "time vs discrete L2 norm")?;
    let mut index = Vec::new();
    for i in 0..sol.len() {
        if i % file_stride == 0 || i + 1 == sol.len() {
            let name = artifacts::snapshot_file_name(i);
            artifacts::write_grid_snapshot(out, &name, &sol.grid().samples(sol.snapshot(i)))?;
            index.push(IndexRow { index: i, time: sol.times()[i], file: name });
        }
    }
    artifacts::write_index(out, "snapshots_index.csv", &index)
}

pub fn pencil(
    cfg: &ExperimentConfig,
    out: &Path,
    theta_flag: Option<f64>,
) -> Result<(), CliError> {
    let theta = theta_flag.or(cfg.theta_radians).ok_or_else(|| {
        CliError::Config("pencil needs theta_radians in the config or --theta".into())
    })?;
    let (a11, a12, a22) =
        (cfg.a11.unwrap_or(1.0), cfg.a12.unwrap_or(0.0), cfg.a22.unwrap_or(1.0));
    let pencil = WedgePencil::new(theta, [[a11, a12], [a12, a22]]).map_err(cfg_err)?;
    let window =
        (cfg.real_window_lo.unwrap_or(-4.6), cfg.real_window_hi.unwrap_or(4.6));
    let imag = cfg.imag_window.unwrap_or(1.0);

    let report = pencil_spectrum_numeric(&pencil, window, imag)?;
    println!("theta = {theta:.9}");
    println!("delta_minus = {:.7}", report.delta_minus);
    println!("delta_plus = {:.7}", report.delta_plus);
    println!("{report}");

    let mut w = artifacts::create(out, "pencil.csv").map_err(CliError::Run)?;
    let go = |r: std::io::Result<()>| r.map_err(|e| CliError::Run(Error::Io(e)));
    go(writeln!(w, "theta,a11,a12,a22,delta_minus,delta_plus,method"))?;
    go(writeln!(
        w,
        "{theta:.12e},{a11:.12e},{a12:.12e},{a22:.12e},{:.12e},{:.12e},{}",
        report.delta_minus, report.delta_plus, report.method
    ))?;
    let mut w = artifacts::create(out, "eigenvalues.csv").map_err(CliError::Run)?;
    go(writeln!(w, "re,im"))?;
    for ev in &report.eigenvalues {
        go(writeln!(w, "{:.12e},{:.12e}", ev.re, ev.im))?;
    }

    if let Some(m) = cfg.weight_order_m {
        let a = cfg.require(cfg.weight_exponent_a, "weight_exponent_a")?;
        let gamma = cfg.require(cfg.smoothness_gamma, "smoothness_gamma")?;
        let budget =
            WeightBudget::new(m, a, gamma, vec![(report.delta_minus, report.delta_plus)])
                .map_err(cfg_err)?;
        let adm = weight_admissible(&budget)?;
        let mut w = artifacts::create(out, "admissibility.csv").map_err(CliError::Run)?;
        for row in adm.csv_rows() {
            go(writeln!(w, "{row}"))?;
        }
        println!("admissible_interval = {}", adm.interval);
        println!("all_pass = {}", adm.all_pass);
    }
    Ok(())
}

pub fn solve_linear(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<(), CliError> {
    let inputs = solve_inputs(cfg)?;
    let coeffs = coefficient_registry(&inputs.coefficients).map_err(cfg_err)?;
    let rhs = rhs_registry(&inputs.rhs).map_err(cfg_err)?;
    let problem =
        ParabolicProblem::new(&inputs.grid, inputs.horizon, coeffs, rhs).map_err(cfg_err)?;
    let steps = (inputs.horizon / inputs.dt).round() as usize;
    let stride = cfg.snapshot_stride.unwrap_or_else(|| default_stride(steps));

    let sol = rothe_solve_strided(&problem, inputs.dt, inputs.scheme, stride)?;
    artifacts::write_run_meta(
        out,
        &RunMeta {
            command: "solve-linear".into(),
            domain: inputs.domain_name,
            grid_level: inputs.grid.level(),
            horizon_time: inputs.horizon,
            step_dt: inputs.dt,
            scheme: inputs.scheme.to_string(),
            seed,
        },
    )?;
    write_solution(out, &sol, 1)?;
    println!("steps = {}", sol.steps_total());
    println!("retained = {}", sol.len());
    println!("final_l2 = {:.12e}", sol.l2_norms().last().copied().unwrap_or(0.0));
    Ok(())
}

pub fn solve_semilinear(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<(), CliError> {
    let inputs = solve_inputs(cfg)?;
    if inputs.scheme != Scheme::ImplicitEuler {
        return Err(CliError::Config(
            "the fixed-point iteration marches with implicit-euler; remove the scheme override"
                .into(),
        ));
    }
    let epsilon = cfg.require(cfg.epsilon, "epsilon")?;
    let power = cfg.require(cfg.power, "power")?;
    let r0 = cfg.r0.unwrap_or(2.0);
    let probes = cfg.probe_count.unwrap_or(3);
    let jet_order = cfg.jet_order.unwrap_or(1);
    let coeffs = coefficient_registry(&inputs.coefficients).map_err(cfg_err)?;
    let rhs = rhs_registry(&inputs.rhs).map_err(cfg_err)?;
    let problem =
        ParabolicProblem::new(&inputs.grid, inputs.horizon, coeffs, rhs).map_err(cfg_err)?;

    let opnorm = estimate_inverse_norm(&problem, inputs.dt, probes)?;
    let data_fn = rhs_registry(&inputs.rhs).map_err(cfg_err)?;
    let eta = data_norm(&inputs.grid, &data_fn, inputs.horizon, inputs.dt, jet_order)?;
    let fp = FixedPointConfig::new(epsilon, power, r0, eta, opnorm)
        .and_then(|c| c.with_constant(cfg.contraction_c.unwrap_or(1.0)))
        .and_then(|c| {
            c.with_stopping(
                cfg.fixed_point_tol.unwrap_or(1e-8),
                cfg.fixed_point_maxiter.unwrap_or(25),
            )
        })
        .map_err(cfg_err)?;

    let small = smallness_check(&fp);
    let mut w = artifacts::create(out, "smallness.txt")?;
    writeln!(w, "{small}").map_err(Error::Io)?;
    println!("{small}");

    let (sol, history) = fixed_point_solve(&problem, &fp, inputs.dt)?;
    let contraction = contraction_and_ball_report(&history, &fp);
    let residual = semilinear_residual(&problem, &fp, &sol)?;

    let mut w = artifacts::create(out, "iteration.csv")?;
    for row in history.csv_rows() {
        writeln!(w, "{row}").map_err(Error::Io)?;
    }
    let mut w = artifacts::create(out, "contraction.txt")?;
    writeln!(w, "q: {:.12e}", contraction.q).map_err(Error::Io)?;
    writeln!(w, "contractive: {}", contraction.contractive).map_err(Error::Io)?;
    writeln!(w, "radius: {:.12e}", contraction.radius).map_err(Error::Io)?;
    writeln!(w, "max_ball_distance: {:.12e}", contraction.max_ball_distance)
        .map_err(Error::Io)?;
    writeln!(w, "within_ball: {}", contraction.within_ball).map_err(Error::Io)?;
    writeln!(w, "residual: {residual:.12e}").map_err(Error::Io)?;

    artifacts::write_run_meta(
        out,
        &RunMeta {
            command: "solve-semilinear".into(),
            domain: inputs.domain_name,
            grid_level: inputs.grid.level(),
            horizon_time: inputs.horizon,
            step_dt: inputs.dt,
            scheme: inputs.scheme.to_string(),
            seed,
        },
    )?;
    let stride = cfg
        .snapshot_stride
        .unwrap_or_else(|| default_stride(sol.len().saturating_sub(1)));
    write_solution(out, &sol, stride)?;
    println!("iterations = {}", history.iterates.len());
    println!("q = {:.12e}", contraction.q);
    println!("residual = {residual:.12e}");
    Ok(())
}

pub fn besov_estimate(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let input = cfg.resolve_input(out);
    let order = cfg.wavelet_order.unwrap_or(DEFAULT_WAVELET_ORDER);
    let system = WaveletSystem::by_order(order).map_err(cfg_err)?;
    let p = cfg.besov_p.unwrap_or(2.0);
    let q = cfg.besov_q.unwrap_or(p);

    let rows = artifacts::read_index(&input, "snapshots_index.csv")?;
    let mut coeff_index = Vec::new();
    let mut smoothness = artifacts::create(out, "smoothness.csv")?;
    writeln!(smoothness, "index,time,s_sobolev,sobolev_r2,s_adaptive,adaptive_r2")
        .map_err(Error::Io)?;
    let mut adaptive_points = Vec::new();
    let mut besov_rows: Vec<String> = Vec::new();
    let mut adaptivity_rows: Vec<String> = Vec::new();

    for row in &rows {
        let samples = artifacts::read_grid_snapshot(&artifacts::resolve(&input, &row.file))?;
        let grid_level = (-samples.spacing.log2()).round() as i64;
        if let Some(j) = cfg.analysis_level {
            if (j as i64) + 2 > grid_level {
                return Err(CliError::Config(format!(
                    "analysis_level {j} needs two guard levels below grid level {grid_level}"
                )));
            }
        }
        let analysis = cfg.analysis_level.unwrap_or(((grid_level - 2).max(1)) as usize);
        let coeffs = forward_2d(&samples, &system, analysis)?;
        let name = artifacts::coeffs_file_name(row.index);
        let mut w = artifacts::create(out, &name)?;
        write_coefficients_csv(&coeffs, &mut w)?;
        coeff_index.push(IndexRow { index: row.index, time: row.time, file: name });

        let (ss, sr) =
            match estimate_smoothness(&coeffs, p, 2, SmoothnessScale::SobolevLike, None) {
                Ok(e) => (e.s, e.r2),
                Err(_) => (f64::NAN, f64::NAN),
            };
        let (sa, ar) = match estimate_smoothness(&coeffs, p, 2, SmoothnessScale::Adaptivity, None)
        {
            Ok(e) => (e.s, e.r2),
            Err(_) => (f64::NAN, f64::NAN),
        };
        writeln!(
            smoothness,
            "{},{:.12e},{ss:.12e},{sr:.12e},{sa:.12e},{ar:.12e}",
            row.index, row.time
        )
        .map_err(Error::Io)?;
        if sa.is_finite() {
            adaptive_points.push((row.time, sa));
        }

        for &s in cfg.besov_s.iter().flatten() {
            let params = BesovParams::new(s, p, q, 2).map_err(cfg_err)?;
            let value = besov_quasinorm(&coeffs, &params)?;
            besov_rows.push(format!("{},{:.12e},{s:.12},{value:.12e}", row.index, row.time));
        }
        for &s in cfg.adaptivity_s.iter().flatten() {
            let point = AdaptivityScalePoint::new(s, p, 2).map_err(cfg_err)?;
            let value = adaptivity_norm(&coeffs, &point)?;
            adaptivity_rows
                .push(format!("{},{:.12e},{s:.12},{value:.12e}", row.index, row.time));
        }
    }
    artifacts::write_index(out, "coeffs_index.csv", &coeff_index)?;
    let mut w = artifacts::create(out, "smoothness.dat")?;
    write_two_column(&mut w, &adaptive_points, "time vs adaptivity-scale smoothness")?;
    if !besov_rows.is_empty() {
        let mut w = artifacts::create(out, "besov_norms.csv")?;
        writeln!(w, "index,time,s,value").map_err(Error::Io)?;
        for row in &besov_rows {
            writeln!(w, "{row}").map_err(Error::Io)?;
        }
    }
    if !adaptivity_rows.is_empty() {
        let mut w = artifacts::create(out, "adaptivity_norms.csv")?;
        writeln!(w, "index,time,s,value").map_err(Error::Io)?;
        for row in &adaptivity_rows {
            writeln!(w, "{row}").map_err(Error::Io)?;
        }
    }
    println!("snapshots = {}", rows.len());
    if let Some(&(t, s)) = adaptive_points.last() {
        println!("final_s_adaptive = {s:.6} at t = {t:.6}");
    }
    Ok(())
}

pub fn nterm(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let input = cfg.resolve_input(out);
    let p = cfg.besov_p.unwrap_or(2.0);
    let counts = cfg.nterm_counts.clone().unwrap_or_else(default_counts);
    let rows = artifacts::read_index(&input, "coeffs_index.csv")?;

    let mut curve_file = artifacts::create(out, "nterm.csv")?;
    writeln!(curve_file, "index,time,n,sigma").map_err(Error::Io)?;
    let mut rate_file = artifacts::create(out, "nterm_rates.csv")?;
    writeln!(rate_file, "index,time,rate,r2").map_err(Error::Io)?;
    let mut last_curve: Vec<(f64, f64)> = Vec::new();
    let mut last_rate = f64::NAN;

    for row in &rows {
        let f = File::open(artifacts::resolve(&input, &row.file)).map_err(|e| {
            CliError::Run(Error::Dependency(format!("cannot open {}: {e}", row.file)))
        })?;
        let coeffs = read_coefficients_csv(BufReader::new(f))?;
        let curve = n_term_curve(&coeffs, &counts, p)?;
        for (&n, &sigma) in curve.counts().iter().zip(curve.errors()) {
            writeln!(curve_file, "{},{:.12e},{n},{sigma:.12e}", row.index, row.time)
                .map_err(Error::Io)?;
        }
        let (rate, r2) = match fit_rate(&curve, 2, None) {
            Ok(fit) => (fit.s, fit.r2),
            Err(_) => (f64::NAN, f64::NAN),
        };
        writeln!(rate_file, "{},{:.12e},{rate:.12e},{r2:.12e}", row.index, row.time)
            .map_err(Error::Io)?;
        last_curve = curve
            .counts()
            .iter()
            .zip(curve.errors())
            .map(|(&n, &s)| (n as f64, s))
            .collect();
        last_rate = rate;
    }
    let mut w = artifacts::create(out, "sigma_final.dat")?;
    write_two_column(&mut w, &last_curve, "term count vs best-N-term error")?;
    println!("snapshots = {}", rows.len());
    println!("final_rate = {last_rate:.6}");
    Ok(())
}

pub fn kondratiev_norm_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let m = cfg.require(cfg.kondratiev_m, "kondratiev_m")?;
    let a = cfg.require(cfg.kondratiev_a, "kondratiev_a")?;
    let p = cfg.kondratiev_p.unwrap_or(2.0);
    let params = KondratievParams::new(m, p, a).map_err(cfg_err)?;
    let field = cfg.field.as_deref().unwrap_or("corner-profile");

    let report: NormReport = match field {
        "corner-profile" => {
            let domain_name = cfg.domain.as_deref().unwrap_or("l-shape");
            let domain = domain_by_name(domain_name)?;
            let level = cfg.require(cfg.grid_level, "grid_level")?;
            let &singular = domain.singular_indices().first().ok_or_else(|| {
                CliError::Config(format!(
                    "domain \"{domain_name}\" has no singular vertex to anchor the corner profile"
                ))
            })?;
            let vertex = domain.vertices()[singular];
            if vertex.x != 0.0 || vertex.y != 0.0 {
                return Err(CliError::Config(format!(
                    "the corner profile is centered at the origin, but the singular vertex sits \
                     at ({}, {})",
                    vertex.x, vertex.y
                )));
            }
            let angle = domain.interior_angle(singular).map_err(cfg_err)?;
            let grid = MaskedGrid::new(domain, level).map_err(cfg_err)?;
            let profile = CornerProfile::new(angle).map_err(cfg_err)?;
            let values = grid.project(|x, y| profile.value(x, y));
            let u = GridFunction::from_values(&grid, values)
                .map_err(cfg_err)?
                .with_derivatives(profile.deriv_fn());
            kondratiev_norm(&u, &params)?
        }
        "snapshot" => {
            let input = cfg.resolve_input(out);
            let meta = artifacts::read_run_meta(&input)?;
            let domain = domain_by_name(&meta.domain).map_err(|_| {
                CliError::Run(Error::Dependency(format!(
                    "run.json names unknown domain \"{}\"",
                    meta.domain
                )))
            })?;
            let grid = MaskedGrid::new(domain, meta.grid_level)?;
            let rows = artifacts::read_index(&input, "snapshots_index.csv")?;
            let last = rows.last().expect("read_index rejects empty indices");
            let samples =
                artifacts::read_grid_snapshot(&artifacts::resolve(&input, &last.file))?;
            if samples.v.len() != grid.node_count() {
                return Err(CliError::Run(Error::Shape(format!(
                    "snapshot holds {} values but the grid has {} nodes",
                    samples.v.len(),
                    grid.node_count()
                ))));
            }
            let u = GridFunction::from_values(&grid, samples.v.clone())?;
            kondratiev_norm(&u, &params)?
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown field \"{other}\"; expected corner-profile or snapshot"
            )))
        }
    };

    let mut w = artifacts::create(out, "kondratiev.txt")?;
    writeln!(w, "{report}").map_err(Error::Io)?;
    println!("{report}");
    Ok(())
}

pub fn hoelder_time(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let beta = cfg.hoelder_beta.unwrap_or(0.5);
    if !(beta.is_finite() && beta > 0.0 && beta <= 1.0) {
        return Err(CliError::Config(format!(
            "hoelder_beta must lie in (0, 1], got {beta}"
        )));
    }
    let input = cfg.resolve_input(out);
    let norms = artifacts::read_norms(&input)?;
    let scalar = hoelder_scalar_quotient(&norms, beta)?;

    // The vector quotient needs stored snapshots; norms alone still give the
    // scalar lower bound. Scaling samples by the grid spacing turns the
    // Euclidean norm into the discrete L2 norm.
    let vector = match artifacts::read_index(&input, "snapshots_index.csv") {
        Ok(rows) => {
            let mut series = Vec::new();
            for row in &rows {
                let s = artifacts::read_grid_snapshot(&artifacts::resolve(&input, &row.file))?;
                let scaled = s.v.iter().map(|v| v * s.spacing).collect();
                series.push((row.time, scaled));
            }
            Some(hoelder_vector_quotient(&series, beta)?)
        }
        Err(_) => None,
    };

    let mut w = artifacts::create(out, "hoelder.txt")?;
    writeln!(w, "beta: {beta:.12}").map_err(Error::Io)?;
    writeln!(w, "scalar_quotient: {scalar:.12e}").map_err(Error::Io)?;
    match vector {
        Some(v) => writeln!(w, "vector_quotient: {v:.12e}").map_err(Error::Io)?,
        None => writeln!(w, "vector_quotient: unavailable").map_err(Error::Io)?,
    }
    println!("beta = {beta:.12}");
    println!("scalar_quotient = {scalar:.12e}");
    match vector {
        Some(v) => println!("vector_quotient = {v:.12e}"),
        None => println!("vector_quotient = unavailable"),
    }
    Ok(())
}

fn render_report(report: &RegularityReport, meta: &RunMeta) -> String {
    let fit = |name: &str, f: &badapt_core::report::FitQuality| {
        if f.reliable {
            format!("{name}: {:.4} (r2 = {:.4})", f.value, f.r_squared)
        } else {
            format!("{name}: {:.4} (r2 = {:.4}, UNRELIABLE)", f.value, f.r_squared)
        }
    };
    let included = report.snapshots.iter().filter(|s| s.included).count();
    let mut text = String::new();
    text.push_str(&format!("domain: {}\n", meta.domain));
    text.push_str(&format!("horizon: {:.6}\n", meta.horizon_time));
    text.push_str(&format!(
        "snapshots: {} stored, {} included\n",
        report.snapshots.len(),
        included
    ));
    text.push_str(&fit("s_sobolev", &report.s_sobolev));
    text.push('\n');
    text.push_str(&fit("s_adaptive", &report.s_adaptive));
    text.push('\n');
    text.push_str(&fit("nterm_rate", &report.nterm_rate));
    text.push('\n');
    text.push_str(&format!("uniform_rate: {:.4}\n", report.uniform_rate));
    match report.gain {
        Some(g) => text.push_str(&format!("gain: {g:.4}\n")),
        None => text.push_str("gain: no claim (a contributing fit has r2 below 0.90)\n"),
    }
    match report.smoothness_gain {
        Some(g) => text.push_str(&format!("smoothness_gain: {g:.4}\n")),
        None => {
            text.push_str("smoothness_gain: no claim (a contributing fit has r2 below 0.90)\n")
        }
    }
    text.push_str(&format!("ceiling: {:.4}\n", report.ceiling));
    text.push_str(&format!("below_ceiling: {}\n", report.below_ceiling));
    for s in &report.snapshots {
        text.push_str(&format!(
            "snapshot {:.6}: included={} s_sobolev={:.4} s_adaptive={:.4} nterm_rate={:.4}\n",
            s.time, s.included, s.s_sobolev, s.s_adaptive, s.nterm_rate
        ));
    }
    text
}

pub fn report_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let input = cfg.resolve_input(out);
    let meta = artifacts::read_run_meta(&input)?;
    let rows = artifacts::read_index(&input, "coeffs_index.csv")?;
    let mut snapshots: Vec<(f64, WaveletCoefficients)> = Vec::new();
    for row in &rows {
        let f = File::open(artifacts::resolve(&input, &row.file)).map_err(|e| {
            CliError::Run(Error::Dependency(format!("cannot open {}: {e}", row.file)))
        })?;
        snapshots.push((row.time, read_coefficients_csv(BufReader::new(f))?));
    }
    let domain = domain_by_name(&meta.domain).map_err(|_| {
        CliError::Run(Error::Dependency(format!(
            "run.json names unknown domain \"{}\"",
            meta.domain
        )))
    })?;
    let request = ReportRequest {
        horizon: meta.horizon_time,
        p: cfg.besov_p.unwrap_or(2.0),
        d: 2,
        gamma: cfg.smoothness_gamma.unwrap_or(2.0),
        m: cfg.weight_order_m.unwrap_or(1),
        singular_dim: domain.delta(),
        counts: cfg.nterm_counts.clone().unwrap_or_else(default_counts),
    };
    let report = regularity_report(&snapshots, &request)?;

    let mut w = artifacts::create(out, "report.json")?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Run(Error::Io(std::io::Error::other(e))))?;
    writeln!(w, "{json}").map_err(Error::Io)?;
    let text = render_report(&report, &meta);
    let mut w = artifacts::create(out, "report.txt")?;
    w.write_all(text.as_bytes()).map_err(Error::Io)?;
    let pairs: Vec<(f64, f64)> = report
        .snapshots
        .iter()
        .filter(|s| s.included)
        .map(|s| (s.time, s.s_adaptive))
        .collect();
    let mut w = artifacts::create(out, "report.dat")?;
    write_two_column(&mut w, &pairs, "time vs adaptivity-scale smoothness (included)")?;
    print!("{text}");
    Ok(())
}
