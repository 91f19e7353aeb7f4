//! End-to-end tests of the `badapt` binary: exit codes, artifact files, and
//! pipeline closure (every producer's output is readable by its consumers).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn badapt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_badapt"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).expect("config is writable");
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary launches")
}

fn assert_code(out: &Output, code: i32, what: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "{what}: expected exit {code}\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stdout_line_value(out: &Output, key: &str) -> f64 {
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix(key) {
            return rest.trim().parse().unwrap_or(f64::NAN);
        }
    }
    panic!("stdout lacks a \"{key}\" line:\n{text}");
}

#[test]
fn pencil_reports_the_reentrant_strip_radii_from_the_flag_alone() {
    let tmp = TempDir::new().unwrap();
    let out = run(badapt()
        .args(["pencil", "--theta", "4.712388980"])
        .args(["--out", tmp.path().to_str().unwrap()]));
    assert_code(&out, 0, "pencil with --theta only");
    let dm = stdout_line_value(&out, "delta_minus =");
    let dp = stdout_line_value(&out, "delta_plus =");
    assert!((dm - 2.0 / 3.0).abs() < 1e-6, "delta_minus {dm} vs 2/3");
    assert!((dp - 2.0 / 3.0).abs() < 1e-6, "delta_plus {dp} vs 2/3");
    assert!(String::from_utf8_lossy(&out.stdout).contains("0.6666667"));
    for file in ["pencil.csv", "eigenvalues.csv"] {
        assert!(tmp.path().join(file).exists(), "{file} must be written");
    }
    let evs = fs::read_to_string(tmp.path().join("eigenvalues.csv")).unwrap();
    assert!(evs.lines().count() > 4, "several eigenvalues in the window:\n{evs}");
}

#[test]
fn pencil_config_drives_the_admissibility_table() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        r#"
command = "pencil"
theta_radians = 4.71238898038469
weight_order_m = 1
weight_exponent_a = -0.5
smoothness_gamma = 2.0
"#,
    );
    let out = run(badapt()
        .args(["pencil", "--config", config.to_str().unwrap()])
        .args(["--out", tmp.path().to_str().unwrap()]));
    assert_code(&out, 0, "pencil with admissibility keys");
    let adm = fs::read_to_string(tmp.path().join("admissibility.csv")).unwrap();
    let mut lines = adm.lines();
    assert_eq!(lines.next(), Some("i,b,lower,upper,pass"));
    assert!(
        adm.lines().skip(1).all(|l| l.ends_with("true")),
        "a = -0.5 lies inside the admissible interval, all rows pass:\n{adm}"
    );
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(stdout.contains("all_pass = true"), "stdout: {stdout}");
}

#[test]
fn zero_forcing_solve_writes_zero_norms_and_identical_reruns() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        r#"
domain = "unit-square"
grid_level = 4
horizon_time = 0.1
step_dt = 0.025
rhs = "zero"
"#,
    );
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for dir in [&out_a, &out_b] {
        let out = run(badapt()
            .args(["solve-linear", "--config", config.to_str().unwrap()])
            .args(["--out", dir.to_str().unwrap()]));
        assert_code(&out, 0, "zero-forcing solve");
    }
    let norms = fs::read_to_string(out_a.join("norms.csv")).unwrap();
    for line in norms.lines().skip(1) {
        let l2: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(l2, 0.0, "zero forcing keeps every snapshot at zero: {line}");
    }
    for file in ["norms.csv", "snapshots_index.csv", "run.json", "snapshot_000000.csv"] {
        let a = fs::read(out_a.join(file)).unwrap();
        let b = fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "rerunning the same config must reproduce {file} byte for byte");
    }
}

#[test]
fn manufactured_run_pipelines_through_all_analysis_commands() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("run");
    let config = write_config(
        tmp.path(),
        r#"
domain = "unit-square"
grid_level = 6
horizon_time = 0.1
step_dt = 0.0125
rhs = "mms"
snapshot_stride = 2
nterm_counts = [4, 8, 16, 32, 64, 128, 256]
"#,
    );
    let cfg = config.to_str().unwrap();
    let out_dir = dir.to_str().unwrap();

    let solve = run(badapt().args(["solve-linear", "--config", cfg, "--out", out_dir]));
    assert_code(&solve, 0, "manufactured solve");
    let final_l2 = stdout_line_value(&solve, "final_l2 =");
    assert!(final_l2 > 0.01, "driven solution is nonzero at the horizon: {final_l2}");

    let besov = run(badapt().args(["besov-estimate", "--config", cfg, "--out", out_dir]));
    assert_code(&besov, 0, "besov-estimate on stored snapshots");
    assert!(dir.join("coeffs_index.csv").exists());
    assert!(dir.join("smoothness.csv").exists());

    let nterm = run(badapt().args(["nterm", "--config", cfg, "--out", out_dir]));
    assert_code(&nterm, 0, "nterm on stored coefficients");
    let sigma = fs::read_to_string(dir.join("sigma_final.dat")).unwrap();
    assert!(sigma.lines().count() >= 7, "sigma curve rows:\n{sigma}");

    let report = run(badapt().args(["report", "--config", cfg, "--out", out_dir]));
    assert_code(&report, 0, "report on solve + coefficient artifacts");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap())
            .expect("report.json parses");
    let s_adaptive = json["s_adaptive"]["value"].as_f64().unwrap();
    assert!(
        s_adaptive > 0.0 && s_adaptive < 3.0,
        "smooth-field adaptive estimate in a sane range: {s_adaptive}"
    );
    let text = fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(text.contains("s_sobolev:"), "report text lists the fits:\n{text}");

    let hoelder = run(badapt().args(["hoelder-time", "--config", cfg, "--out", out_dir]));
    assert_code(&hoelder, 0, "hoelder-time on stored norms and snapshots");
    let quotients = fs::read_to_string(dir.join("hoelder.txt")).unwrap();
    let vector: f64 = quotients
        .lines()
        .find_map(|l| l.strip_prefix("vector_quotient: "))
        .expect("vector quotient line")
        .parse()
        .unwrap();
    let scalar: f64 = quotients
        .lines()
        .find_map(|l| l.strip_prefix("scalar_quotient: "))
        .expect("scalar quotient line")
        .parse()
        .unwrap();
    assert!(vector.is_finite() && vector > 0.0, "vector quotient: {quotients}");
    assert!(
        scalar <= vector * (1.0 + 1e-12),
        "norm quotient is a lower bound: scalar {scalar} vs vector {vector}"
    );
}

#[test]
fn semilinear_solve_reports_contraction_and_smallness() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        r#"
domain = "unit-square"
grid_level = 4
horizon_time = 0.1
step_dt = 0.025
rhs = "smooth_compatible"
epsilon = 1e-3
power = 2
"#,
    );
    let out = run(badapt()
        .args(["solve-semilinear", "--config", config.to_str().unwrap()])
        .args(["--out", tmp.path().to_str().unwrap()]));
    assert_code(&out, 0, "semilinear solve");
    let contraction = fs::read_to_string(tmp.path().join("contraction.txt")).unwrap();
    let q: f64 = contraction
        .lines()
        .find_map(|l| l.strip_prefix("q: "))
        .expect("q line")
        .parse()
        .unwrap();
    assert!(q < 1.0, "weak nonlinearity contracts: {contraction}");
    assert!(contraction.contains("within_ball: true"), "{contraction}");
    let smallness = fs::read_to_string(tmp.path().join("smallness.txt")).unwrap();
    assert!(smallness.contains("pass"), "smallness verdict recorded: {smallness}");
    let iteration = fs::read_to_string(tmp.path().join("iteration.csv")).unwrap();
    assert!(iteration.lines().count() >= 3, "iteration history rows:\n{iteration}");
}

#[test]
fn kondratiev_norm_certifies_the_corner_profile_per_weight() {
    let tmp = TempDir::new().unwrap();
    for (a, expect) in [(0.5, "value="), (1.5, "DIVERGENT")] {
        let config = write_config(
            tmp.path(),
            &format!(
                r#"
domain = "l-shape"
grid_level = 5
kondratiev_m = 2
kondratiev_a = {a}
"#
            ),
        );
        let out = run(badapt()
            .args(["kondratiev-norm", "--config", config.to_str().unwrap()])
            .args(["--out", tmp.path().to_str().unwrap()]));
        assert_code(&out, 0, "kondratiev-norm certification run");
        let text = fs::read_to_string(tmp.path().join("kondratiev.txt")).unwrap();
        assert!(text.contains(expect), "a = {a} expected {expect}, got: {text}");
    }
}

#[test]
fn config_problems_exit_with_code_2() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().to_str().unwrap().to_string();

    let missing = run(badapt().args([
        "solve-linear",
        "--config",
        tmp.path().join("absent.toml").to_str().unwrap(),
        "--out",
        &out_dir,
    ]));
    assert_code(&missing, 2, "missing config file");

    let unknown_key = write_config(tmp.path(), "bogus_key = 1\n");
    let out = run(badapt()
        .args(["solve-linear", "--config", unknown_key.to_str().unwrap(), "--out", &out_dir]));
    assert_code(&out, 2, "unknown config key");

    let order_violation = write_config(
        tmp.path(),
        r#"
wavelet_order = 2
besov_s = [2.5]
"#,
    );
    let out = run(badapt()
        .args(["besov-estimate", "--config", order_violation.to_str().unwrap()])
        .args(["--out", &out_dir]));
    assert_code(&out, 2, "requested smoothness above the wavelet order");
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("not below"),
        "stderr explains the order bound: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let mismatched = write_config(tmp.path(), "command = \"pencil\"\n");
    let out = run(badapt()
        .args(["solve-linear", "--config", mismatched.to_str().unwrap(), "--out", &out_dir]));
    assert_code(&out, 2, "config declares a different command");

    let incomplete = write_config(tmp.path(), "domain = \"unit-square\"\n");
    let out = run(badapt()
        .args(["solve-linear", "--config", incomplete.to_str().unwrap(), "--out", &out_dir]));
    assert_code(&out, 2, "missing required solver keys");
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("grid_level"),
        "stderr names the missing key: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn missing_artifacts_and_bad_data_exit_with_code_3() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let config = write_config(tmp.path(), "");

    let report = run(badapt()
        .args(["report", "--config", config.to_str().unwrap()])
        .args(["--out", empty.to_str().unwrap()]));
    assert_code(&report, 3, "report without solve artifacts");

    let nterm = run(badapt()
        .args(["nterm", "--config", config.to_str().unwrap()])
        .args(["--out", empty.to_str().unwrap()]));
    assert_code(&nterm, 3, "nterm without coefficient artifacts");

    let dup = tmp.path().join("dup");
    fs::create_dir_all(&dup).unwrap();
    fs::write(
        dup.join("norms.csv"),
        "index,time,l2_norm\n0,0.0e0,1.0e0\n1,0.0e0,2.0e0\n",
    )
    .unwrap();
    let hoelder = run(badapt()
        .args(["hoelder-time", "--config", config.to_str().unwrap()])
        .args(["--out", dup.to_str().unwrap()]));
    assert_code(&hoelder, 3, "duplicate snapshot times are an ordering error");
}

#[test]
fn output_directory_env_var_is_honored() {
    let tmp = TempDir::new().unwrap();
    let env_dir = tmp.path().join("from-env");
    let out = run(badapt()
        .args(["pencil", "--theta", "3.14159265358979"])
        .env("BADAPT_OUT", env_dir.to_str().unwrap()));
    assert_code(&out, 0, "pencil with BADAPT_OUT");
    assert!(env_dir.join("pencil.csv").exists(), "artifacts land in BADAPT_OUT");
}
