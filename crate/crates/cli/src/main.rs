//! `badapt` — command-line pipeline for measuring corner-singularity
//! effects in parabolic model problems.
//!
//! Every subcommand reads one flat TOML config and writes its artifacts to
//! an output directory; analysis subcommands consume the artifacts of
//! earlier ones from an input directory, which defaults to the output
//! directory so a pipeline can run in a single folder. Exit codes: 0 on
//! success, 2 for configuration and usage errors, 3 for numerical or
//! diagnostic failures during a run.

mod artifacts;
mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;

/// Failures split by exit code: configuration problems (2) versus failures
/// of the numerical run itself (3).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(badapt_core::Error),
}

impl From<badapt_core::Error> for CliError {
    fn from(e: badapt_core::Error) -> Self {
        CliError::Run(e)
    }
}

#[derive(Parser)]
#[command(
    name = "badapt",
    version,
    about = "Corner-singularity measurement pipeline for parabolic model problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Wedge pencil spectrum, eigenvalue-free strips, and weight admissibility
    Pencil(PencilArgs),
    /// March a linear heat-type problem and store snapshots
    SolveLinear(CommonArgs),
    /// Solve the power-nonlinearity problem by fixed-point iteration
    SolveSemilinear(CommonArgs),
    /// Wavelet-transform stored snapshots and estimate smoothness
    BesovEstimate(CommonArgs),
    /// Best-N-term error curves and fitted rates from stored coefficients
    Nterm(CommonArgs),
    /// Corner-weighted Sobolev norm with divergence certification
    KondratievNorm(CommonArgs),
    /// Hölder-in-time difference quotients from stored snapshots
    HoelderTime(CommonArgs),
    /// Aggregate regularity report comparing smoothness scales
    Report(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (flat TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides BADAPT_OUT and the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed recorded with the artifacts (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PencilArgs {
    /// Experiment configuration file; optional when --theta is given
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides BADAPT_OUT and the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed recorded with the artifacts (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Wedge opening angle in radians (overrides theta_radians)
    #[arg(long)]
    theta: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("run failed: {e}");
            ExitCode::from(3)
        }
    }
}

fn prepare_out(path: PathBuf) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&path).map_err(|e| {
        CliError::Config(format!("cannot create output directory {}: {e}", path.display()))
    })?;
    Ok(path)
}

fn with_config(
    args: CommonArgs,
    name: &str,
    run: impl FnOnce(&ExperimentConfig, &Path, u64) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(&args.config, name)?;
    let out = prepare_out(cfg.resolve_out(args.out))?;
    let seed = cfg.resolve_seed(args.seed);
    run(&cfg, &out, seed)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Pencil(args) => {
            let cfg = match &args.config {
                Some(path) => ExperimentConfig::load(path, "pencil")?,
                None if args.theta.is_some() => ExperimentConfig::default(),
                None => {
                    return Err(CliError::Config(
                        "pencil needs --config or --theta".into(),
                    ))
                }
            };
            let out = prepare_out(cfg.resolve_out(args.out))?;
            commands::pencil(&cfg, &out, args.theta)
        }
        Command::SolveLinear(args) => {
            with_config(args, "solve-linear", commands::solve_linear)
        }
        Command::SolveSemilinear(args) => {
            with_config(args, "solve-semilinear", commands::solve_semilinear)
        }
        Command::BesovEstimate(args) => {
            with_config(args, "besov-estimate", |cfg, out, _| {
                commands::besov_estimate(cfg, out)
            })
        }
        Command::Nterm(args) => {
            with_config(args, "nterm", |cfg, out, _| commands::nterm(cfg, out))
        }
        Command::KondratievNorm(args) => {
            with_config(args, "kondratiev-norm", |cfg, out, _| {
                commands::kondratiev_norm_cmd(cfg, out)
            })
        }
        Command::HoelderTime(args) => {
            with_config(args, "hoelder-time", |cfg, out, _| {
                commands::hoelder_time(cfg, out)
            })
        }
        Command::Report(args) => {
            with_config(args, "report", |cfg, out, _| commands::report_cmd(cfg, out))
        }
    }
}
