//! Run configuration shared by the JSON config file and the command line.

use std::f64::consts::FRAC_PI_4;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tempent_core::spin::MAX_DENSE_SITES;
use tempent_core::ModelParams;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Kappa,
    Spectrum,
    EntropyCurve,
    PhaseDiagram,
    Collapse,
    Czz,
    Mps,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Kappa => "kappa",
            Command::Spectrum => "spectrum",
            Command::EntropyCurve => "entropy-curve",
            Command::PhaseDiagram => "phase-diagram",
            Command::Collapse => "collapse",
            Command::Czz => "czz",
            Command::Mps => "mps",
        }
    }

    fn default_t_max(self) -> usize {
        match self {
            Command::Kappa => 200,
            Command::Spectrum => 0,
            Command::EntropyCurve | Command::PhaseDiagram | Command::Collapse => 150,
            Command::Czz | Command::Mps => 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub j: f64,
    pub g: f64,
    pub h: f64,
    /// Explicit horizons; overrides `t_max` where a list makes sense.
    pub t_list: Option<Vec<usize>>,
    /// Largest horizon (κ lag for `kappa`); command-specific default when absent.
    pub t_max: Option<usize>,
    pub chi: Vec<usize>,
    /// Longitudinal-field sweep for `czz` and `mps`; `[h]` when absent.
    pub h_list: Option<Vec<f64>>,
    pub omega_points: usize,
    /// κ window for the spectral density.
    pub window: usize,
    /// Cells per axis of the phase diagram.
    pub grid: usize,
    pub cut_fraction: f64,
    /// Positive detunings; `collapse` also runs their negatives and δ = 0.
    pub deltas: Vec<f64>,
    /// Critical-line point `(x, x)` to detune as `(x − δ, x + δ)`.
    pub anchor: Option<f64>,
    /// Direction `φ` for the self-dual scan `(π/4 − δ cos φ, π/4 − δ sin φ)`.
    pub angle: Option<f64>,
    pub ed_sites: usize,
    pub out: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    /// Directory for MPS checkpoints.
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            j: 0.31,
            g: FRAC_PI_4,
            h: 0.0,
            t_list: None,
            t_max: None,
            chi: vec![64, 128],
            h_list: None,
            omega_points: 1024,
            window: tempent_core::majorana::SPECTRAL_WINDOW,
            grid: 33,
            cut_fraction: 0.5,
            deltas: vec![0.002, 0.004, 0.006, 0.008, 0.01],
            anchor: None,
            angle: None,
            ed_sites: 13,
            out: None,
            workers: 0,
            checkpoint: None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn check_angles(j: f64, g: f64, what: &str) -> Result<(), CliError> {
    ModelParams::new(j, g, 0.0).map_err(|e| invalid(format!("{what}: {e} (J and g must lie in the quadrant [0, π/2])")))?;
    if j.cos() < 1e-8 {
        return Err(invalid(format!("{what}: κ prefactor 2 tan²J diverges at J = π/2")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self, CliError> {
        serde_json::from_str(s).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn command(&self) -> Result<Command, CliError> {
        self.command.ok_or_else(|| invalid("no command given"))
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        ModelParams::new(self.j, self.g, self.h).map_err(|e| invalid(format!("{e} (J and g must lie in the quadrant [0, π/2])")))
    }

    pub fn t_max(&self) -> usize {
        self.t_max.unwrap_or_else(|| self.command.map_or(0, Command::default_t_max))
    }

    /// Horizons for curve-like commands: `t_list`, else `first..=t_max` in steps of `step`.
    pub fn horizons(&self, first: usize, step: usize) -> Vec<usize> {
        match &self.t_list {
            Some(ts) => ts.clone(),
            None => (first..=self.t_max()).step_by(step).collect(),
        }
    }

    pub fn fields(&self) -> Vec<f64> {
        self.h_list.clone().unwrap_or_else(|| vec![self.h])
    }

    /// Checks every numeric field the selected command will use.
    pub fn validate(&self) -> Result<(), CliError> {
        let cmd = self.command()?;
        let p = self.params()?;
        if let Some(ts) = &self.t_list {
            if ts.is_empty() || ts.contains(&0) {
                return Err(invalid("t_list must be non-empty with every t ≥ 1"));
            }
        }
        if !(self.cut_fraction > 0.0 && self.cut_fraction < 1.0) {
            return Err(invalid(format!("cut_fraction = {} outside (0, 1)", self.cut_fraction)));
        }
        let needs_integrable = matches!(cmd, Command::Kappa | Command::Spectrum | Command::PhaseDiagram | Command::Collapse);
        if needs_integrable && p.h != 0.0 {
            return Err(invalid(format!("{} needs h = 0 (got {})", cmd.name(), p.h)));
        }
        let uses_kappa = matches!(cmd, Command::Kappa | Command::Spectrum) || (cmd == Command::EntropyCurve && p.h == 0.0);
        if uses_kappa && p.j.cos() < 1e-8 {
            return Err(invalid("κ prefactor 2 tan²J diverges at J = π/2"));
        }
        match cmd {
            Command::Kappa => {}
            Command::Spectrum => {
                if self.omega_points < 2 || self.window < 2 {
                    return Err(invalid("omega_points and window must be ≥ 2"));
                }
            }
            Command::EntropyCurve | Command::Czz | Command::Mps => {
                if self.t_max() == 0 && self.t_list.is_none() {
                    return Err(invalid("t_max must be ≥ 1"));
                }
            }
            Command::PhaseDiagram => {
                if self.grid == 0 || self.t_max() == 0 {
                    return Err(invalid("grid and t_max must be ≥ 1"));
                }
            }
            Command::Collapse => self.validate_collapse()?,
        }
        if matches!(cmd, Command::EntropyCurve | Command::Czz | Command::Mps) {
            for &h in &self.fields() {
                ModelParams::new(p.j, p.g, h).map_err(|e| invalid(format!("h_list: {e}")))?;
            }
        }
        if matches!(cmd, Command::Czz | Command::Mps) || (cmd == Command::EntropyCurve && p.h != 0.0) {
            if self.chi.is_empty() || self.chi.contains(&0) {
                return Err(invalid("chi must be a non-empty list of positive bond dimensions"));
            }
        }
        if cmd == Command::Czz && !(3..=MAX_DENSE_SITES).contains(&self.ed_sites) {
            return Err(invalid(format!("ed_sites = {} outside 3..={MAX_DENSE_SITES}", self.ed_sites)));
        }
        Ok(())
    }

    fn validate_collapse(&self) -> Result<(), CliError> {
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(invalid("deltas must be a non-empty list of positive detunings"));
        }
        let dmax = self.deltas.iter().cloned().fold(0.0, f64::max);
        match (self.anchor, self.angle) {
            (Some(x), None) => {
                check_angles(x - dmax, x + dmax, "anchor − δ")?;
                check_angles(x + dmax, x - dmax, "anchor + δ")?;
            }
            (None, Some(phi)) => {
                if !phi.is_finite() {
                    return Err(invalid("angle is not finite"));
                }
                check_angles(FRAC_PI_4 - dmax * phi.cos(), FRAC_PI_4 - dmax * phi.sin(), "self-dual scan")?;
            }
            _ => return Err(invalid("collapse needs exactly one of anchor or angle")),
        }
        if self.horizons(10, 10).is_empty() {
            return Err(invalid("collapse needs t_max ≥ 10 or an explicit t_list"));
        }
        Ok(())
    }
}
