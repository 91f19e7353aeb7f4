//! Experiment configuration: a flat TOML file of key-value pairs shared by
//! all subcommands.
//!
//! Every key is optional at parse time; each subcommand checks for the keys
//! it needs and falls back to documented defaults for the rest. Dimensional
//! quantities carry their unit in the key name (`theta_radians`,
//! `horizon_time`, `step_dt`). Unknown keys are rejected so typos surface as
//! config errors instead of silently running with defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

/// One experiment description. See the field groups for which subcommands
/// consume what.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional subcommand name; when present it must match the invoked
    /// subcommand, guarding against running the wrong config file.
    pub command: Option<String>,
    pub out_dir: Option<PathBuf>,
    /// Directory holding artifacts from an earlier subcommand; defaults to
    /// the output directory so a whole pipeline can share one folder.
    pub input_dir: Option<PathBuf>,
    pub seed: Option<u64>,

    // Domain and time-stepping (solve-linear, solve-semilinear,
    // kondratiev-norm).
    pub domain: Option<String>,
    pub grid_level: Option<usize>,
    pub horizon_time: Option<f64>,
    pub step_dt: Option<f64>,
    pub scheme: Option<String>,
    pub coefficients: Option<String>,
    pub rhs: Option<String>,
    pub snapshot_stride: Option<usize>,

    // Wedge pencil and weight admissibility (pencil).
    pub theta_radians: Option<f64>,
    pub a11: Option<f64>,
    pub a12: Option<f64>,
    pub a22: Option<f64>,
    pub real_window_lo: Option<f64>,
    pub real_window_hi: Option<f64>,
    pub imag_window: Option<f64>,
    pub weight_order_m: Option<usize>,
    pub weight_exponent_a: Option<f64>,
    pub smoothness_gamma: Option<f64>,

    // Wavelet analysis (besov-estimate, nterm, report).
    pub wavelet_order: Option<usize>,
    pub analysis_level: Option<usize>,
    pub besov_p: Option<f64>,
    pub besov_q: Option<f64>,
    pub besov_s: Option<Vec<f64>>,
    pub adaptivity_s: Option<Vec<f64>>,
    pub nterm_counts: Option<Vec<usize>>,

    // Corner-weighted norms (kondratiev-norm).
    pub kondratiev_m: Option<usize>,
    pub kondratiev_p: Option<f64>,
    pub kondratiev_a: Option<f64>,
    pub field: Option<String>,

    // Fixed-point iteration (solve-semilinear).
    pub epsilon: Option<f64>,
    pub power: Option<u32>,
    pub r0: Option<f64>,
    pub contraction_c: Option<f64>,
    pub fixed_point_tol: Option<f64>,
    pub fixed_point_maxiter: Option<usize>,
    pub probe_count: Option<usize>,
    pub jet_order: Option<usize>,

    // Time-regularity quotient (hoelder-time).
    pub hoelder_beta: Option<f64>,
}

impl ExperimentConfig {
    /// Reads and parses the TOML file, then checks cross-field invariants.
    pub fn load(path: &Path, command: &str) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse config {}: {e}", path.display())))?;
        cfg.validate(command)?;
        Ok(cfg)
    }

    fn validate(&self, command: &str) -> Result<(), CliError> {
        if let Some(declared) = &self.command {
            if declared != command {
                return Err(CliError::Config(format!(
                    "config declares command \"{declared}\" but \"{command}\" was invoked"
                )));
            }
        }
        // The smoothness readings a filter of order r can support stop below
        // r, so every requested evaluation point must stay under it.
        let order = self.wavelet_order.unwrap_or(DEFAULT_WAVELET_ORDER) as f64;
        let requested = self
            .besov_s
            .iter()
            .flatten()
            .chain(self.adaptivity_s.iter().flatten());
        for &s in requested {
            if !(s < order) {
                return Err(CliError::Config(format!(
                    "requested smoothness {s} is not below the wavelet order {order}; \
                     raise wavelet_order or lower the request"
                )));
            }
        }
        Ok(())
    }

    /// Output directory precedence: `--out` flag, then the `BADAPT_OUT`
    /// environment variable, then the config key, then `./badapt-out`.
    pub fn resolve_out(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| std::env::var_os("BADAPT_OUT").map(PathBuf::from))
            .or_else(|| self.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("badapt-out"))
    }

    pub fn resolve_input(&self, out: &Path) -> PathBuf {
        self.input_dir.clone().unwrap_or_else(|| out.to_path_buf())
    }

    pub fn resolve_seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    /// Fetches a required key, naming it in the error when absent.
    pub fn require<T: Copy>(&self, field: Option<T>, key: &str) -> Result<T, CliError> {
        field.ok_or_else(|| CliError::Config(format!("config key \"{key}\" is required")))
    }

    pub fn require_str<'a>(
        &self,
        field: &'a Option<String>,
        key: &str,
    ) -> Result<&'a str, CliError> {
        field
            .as_deref()
            .ok_or_else(|| CliError::Config(format!("config key \"{key}\" is required")))
    }
}

pub const DEFAULT_WAVELET_ORDER: usize = 3;

/// Default term counts for N-term error curves: dyadic up to 1024.
pub fn default_counts() -> Vec<usize> {
    vec![4, 8, 16, 32, 64, 128, 256, 512, 1024]
}
