//! Sweep configuration: defaults, file overrides, validation, and the
//! content hash that names output directories.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    KickedTop,
    Dicke,
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Model::KickedTop => write!(f, "kicked_top"),
            Model::Dicke => write!(f, "dicke"),
        }
    }
}

/// Everything that defines a correspondence sweep (output location excluded:
/// the hash must identify the science, not the destination).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: Model,
    /// Kick strengths (kicked top) or couplings (Dicke).
    pub controls: Vec<f64>,
    /// Kicked-top precession angle.
    pub beta: f64,
    /// Kicked-top quantum sizes.
    pub j_values: Vec<u32>,
    /// Kicked-top classical trajectory lengths.
    pub n_kicks: Vec<usize>,
    /// Dicke atom numbers.
    pub n_atoms: Vec<u32>,
    /// Dicke boson truncation.
    pub n_tr: usize,
    pub omega: f64,
    pub omega0: f64,
    pub shell_center: f64,
    pub shell_lo_offset: f64,
    pub shell_hi_offset: f64,
    /// Dicke classical evolution times.
    pub t_m: Vec<f64>,
    /// Trajectories per ensemble.
    pub ensemble: usize,
    pub seed: u64,
    /// Bins for R_c distributions.
    pub bins: usize,
    /// Integrator tolerance for section statistics (Dicke classical side).
    pub ode_tol: f64,
    /// Size grids by the exact entropy maximizer N/ln2 instead of N.
    pub exact_cells: bool,
    pub fit_amplitude: f64,
    pub fit_free_amplitude: bool,
    /// Weight fit residuals by 1/x_stderr^2.
    pub weighted_fit: bool,
}

impl SweepConfig {
    pub fn defaults(model: Model) -> Self {
        match model {
            Model::KickedTop => Self {
                model,
                controls: vec![
                    0.2, 0.5, 1.0, 1.5, 2.0, 2.3, 2.6, 3.0, 3.5, 4.0, 5.0, 6.0, 7.0,
                ],
                beta: std::f64::consts::FRAC_PI_3,
                j_values: vec![200, 400],
                n_kicks: vec![1000, 4000],
                n_atoms: vec![],
                n_tr: 160,
                omega: 1.0,
                omega0: 1.0,
                shell_center: 1.2,
                shell_lo_offset: 0.15,
                shell_hi_offset: 0.02,
                t_m: vec![],
                ensemble: 1600,
                seed: 7777,
                bins: 50,
                ode_tol: 1e-9,
                exact_cells: false,
                fit_amplitude: 1.02,
                fit_free_amplitude: false,
                weighted_fit: false,
            },
            Model::Dicke => Self {
                model,
                controls: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
                beta: std::f64::consts::FRAC_PI_3,
                j_values: vec![],
                n_kicks: vec![],
                n_atoms: vec![20, 30],
                n_tr: 160,
                omega: 1.0,
                omega0: 1.0,
                shell_center: 1.2,
                shell_lo_offset: 0.15,
                shell_hi_offset: 0.02,
                t_m: vec![1000.0, 1500.0],
                ensemble: 400,
                seed: 7777,
                bins: 50,
                ode_tol: 1e-9,
                exact_cells: false,
                fit_amplitude: 1.02,
                fit_free_amplitude: false,
                weighted_fit: false,
            },
        }
    }

    /// Override fields from a TOML key-value document. Unknown keys are
    /// config errors, not typos to ignore.
    pub fn merged_with_toml(&self, text: &str) -> Result<Self> {
        let mut base = toml::Table::try_from(self)
            .map_err(|e| CliError::Config(format!("internal config serialization: {e}")))?;
        let over: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("config file parse: {e}")))?;
        for (k, v) in over {
            if !base.contains_key(&k) {
                return Err(CliError::Config(format!("unknown config key `{k}`")));
            }
            base.insert(k, v);
        }
        base.try_into()
            .map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.controls.is_empty() {
            return Err(CliError::Config("empty control grid".into()));
        }
        if self.controls.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(CliError::Config("controls must be finite and >= 0".into()));
        }
        if self.ensemble < 1 {
            return Err(CliError::Config("ensemble size must be >= 1".into()));
        }
        if self.bins < 1 {
            return Err(CliError::Config("bins must be >= 1".into()));
        }
        if !(self.ode_tol > 0.0) {
            return Err(CliError::Config("ode_tol must be positive".into()));
        }
        if !(self.fit_amplitude > 0.0) {
            return Err(CliError::Config("fit amplitude must be positive".into()));
        }
        match self.model {
            Model::KickedTop => {
                if self.j_values.is_empty() {
                    return Err(CliError::Config("kicked top sweep needs j_values".into()));
                }
                if self.j_values.iter().any(|&j| j == 0 || j % 2 != 0) {
                    return Err(CliError::Config("j values must be positive and even".into()));
                }
                if self.n_kicks.is_empty() || self.n_kicks.iter().any(|&n| n < 3) {
                    return Err(CliError::Config("n_kicks must be non-empty, entries >= 3".into()));
                }
                if !(0.0..2.0 * std::f64::consts::PI).contains(&self.beta) {
                    return Err(CliError::Config("beta outside [0, 2 pi)".into()));
                }
            }
            Model::Dicke => {
                if self.n_atoms.is_empty() {
                    return Err(CliError::Config("dicke sweep needs n_atoms".into()));
                }
                if self.n_atoms.iter().any(|&n| n == 0 || n % 2 != 0) {
                    return Err(CliError::Config("n_atoms must be positive and even".into()));
                }
                if self.n_tr < 1 {
                    return Err(CliError::Config("n_tr must be >= 1".into()));
                }
                if self.t_m.is_empty() || self.t_m.iter().any(|&t| !(t > 0.0)) {
                    return Err(CliError::Config("t_m must be non-empty and positive".into()));
                }
                if !(self.omega > 0.0) || !(self.omega0 > 0.0) {
                    return Err(CliError::Config("frequencies must be positive".into()));
                }
                if !(self.shell_lo_offset >= 0.0) || !(self.shell_hi_offset >= 0.0) {
                    return Err(CliError::Config("shell offsets must be >= 0".into()));
                }
            }
        }
        Ok(())
    }

    /// 12-hex-digit content hash over the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }
}
