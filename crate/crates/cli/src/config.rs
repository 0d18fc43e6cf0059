//! Run configuration: a TOML document whose tables mirror the dotted keys
//! `model.*`, `quantum.*`, `measurement.*`, ... Every key has a default, so an
//! empty document describes the chaotic Duffing run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qct_core::criteria::{rectangle_area, XiMode};
use qct_core::model::HamiltonianSpec;
use qct_core::qdyn::MeasurementSpec;
use qct_core::qstate::PositionGrid;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: HamiltonianSpec,
    pub initial: InitialConfig,
    pub quantum: QuantumConfig,
    pub measurement: MeasurementConfig,
    pub classical: ClassicalConfig,
    pub lyapunov: LyapunovConfig,
    pub run: RunSection,
    pub criteria: CriteriaConfig,
    pub output: OutputConfig,
}

/// Centroid of the coherent initial state and of the matched classical cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub x0: f64,
    pub p0: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { x0: -3.0, p0: 8.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantumConfig {
    pub hbar: f64,
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub dt: f64,
    /// Momentum samples of the Wigner grid.
    pub n_p: usize,
}

impl Default for QuantumConfig {
    fn default() -> Self {
        Self {
            hbar: 0.1,
            n_points: 2048,
            x_min: -7.0,
            x_max: 7.0,
            dt: 1e-4,
            n_p: 2048,
        }
    }
}

/// Exactly one of `k` and `D` may be given; the other follows from `D = ħ²k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, rename = "D", skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<f64>,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            k: Some(1.0),
            diffusion: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    pub n_samples: usize,
    pub dt: f64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            dt: 1e-3,
        }
    }
}

/// Benettin estimation of the mean exponent over orbits started from the
/// matched classical cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovConfig {
    pub n_orbits: usize,
    pub t_span: f64,
    pub dt: f64,
    pub renorm_every: usize,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            n_orbits: 16,
            t_span: 500.0,
            dt: 1e-3,
            renorm_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub t_final: f64,
    pub seed: u64,
    pub n_traj: usize,
    /// Steps between recorded trajectory rows.
    pub record_every: usize,
    pub wigner_times: Vec<f64>,
    /// Recorded rows per window of the trajectory noise metric.
    pub noise_window: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        let mut wigner_times: Vec<f64> = (0..=12).map(|i| 0.5 * i as f64).collect();
        wigner_times.extend([8.0, 10.0, 12.0, 14.0, 16.0, 17.0, 18.0]);
        Self {
            t_final: 12.0,
            seed: 1,
            n_traj: 100,
            record_every: 100,
            wigner_times,
            noise_window: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriteriaConfig {
    pub margin_factor: f64,
    pub xi_mode: XiMode,
    /// Rectangle bounding the accessible phase-space area.
    pub x_bounds: [f64; 2],
    pub p_bounds: [f64; 2],
    /// Orbit length and step of the phase-space time averages.
    pub averages_t_span: f64,
    pub averages_dt: f64,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self {
            margin_factor: qct_core::criteria::DEFAULT_MARGIN_FACTOR,
            xi_mode: XiMode::Min,
            x_bounds: [-5.0, 5.0],
            p_bounds: [-20.0, 20.0],
            averages_t_span: 200.0,
            averages_dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Qctw,
    /// Wigner grids as `x,p,w` text in addition to the binary dump.
    WignerCsv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Qctw],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<(), CliError> {
    if v >= 1 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be >= 1")))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Configuration recorded in the metadata JSON of an earlier run.
    pub fn from_metadata(json: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(json).map_err(|e| CliError::Config(e.to_string()))?;
        let config = value
            .get("config")
            .ok_or_else(|| CliError::Config("metadata has no config object".into()))?;
        let cfg: Self = serde_json::from_value(config.clone()).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let q = &self.quantum;
        positive("quantum.hbar", q.hbar)?;
        positive("quantum.dt", q.dt)?;
        if !(q.x_max > q.x_min) {
            return Err(CliError::Config("quantum.x_max must exceed quantum.x_min".into()));
        }
        if q.n_points < 4 || q.n_p < 4 {
            return Err(CliError::Config("quantum.n_points and quantum.n_p must be >= 4".into()));
        }
        match (self.measurement.k, self.measurement.diffusion) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "give exactly one of measurement.k and measurement.D, not both".into(),
                ))
            }
            (None, None) => return Err(CliError::Config("one of measurement.k or measurement.D is required".into())),
            (Some(v), None) | (None, Some(v)) => {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(CliError::Config(format!("measurement strength must be >= 0, got {v}")));
                }
            }
        }
        at_least_one("classical.n_samples", self.classical.n_samples)?;
        positive("classical.dt", self.classical.dt)?;
        let l = &self.lyapunov;
        at_least_one("lyapunov.n_orbits", l.n_orbits)?;
        at_least_one("lyapunov.renorm_every", l.renorm_every)?;
        positive("lyapunov.t_span", l.t_span)?;
        positive("lyapunov.dt", l.dt)?;
        let r = &self.run;
        positive("run.t_final", r.t_final)?;
        at_least_one("run.n_traj", r.n_traj)?;
        at_least_one("run.record_every", r.record_every)?;
        at_least_one("run.noise_window", r.noise_window)?;
        if r.wigner_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(CliError::Config("run.wigner_times must be finite and >= 0".into()));
        }
        if r.wigner_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("run.wigner_times must be strictly increasing".into()));
        }
        let c = &self.criteria;
        if !(c.margin_factor >= 1.0 && c.margin_factor.is_finite()) {
            return Err(CliError::Config(format!(
                "criteria.margin_factor must be >= 1, got {}",
                c.margin_factor
            )));
        }
        if !(c.x_bounds[1] > c.x_bounds[0] && c.p_bounds[1] > c.p_bounds[0]) {
            return Err(CliError::Config("criteria bounds must be increasing pairs".into()));
        }
        positive("criteria.averages_t_span", c.averages_t_span)?;
        positive("criteria.averages_dt", c.averages_dt)?;
        Ok(())
    }

    pub fn measurement(&self) -> Result<MeasurementSpec, CliError> {
        let hbar = self.quantum.hbar;
        let spec = match (self.measurement.k, self.measurement.diffusion) {
            (Some(k), None) => MeasurementSpec::new(k, hbar),
            (None, Some(d)) => MeasurementSpec::from_diffusion(d, hbar),
            _ => return Err(CliError::Config("give exactly one of measurement.k and measurement.D".into())),
        };
        spec.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<PositionGrid, CliError> {
        let q = &self.quantum;
        PositionGrid::new(q.n_points, q.x_min, q.x_max).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn area(&self) -> f64 {
        let c = &self.criteria;
        rectangle_area(c.x_bounds[0], c.x_bounds[1], c.p_bounds[0], c.p_bounds[1])
    }

    /// Recorded trajectory rows are this far apart in time.
    pub fn record_interval(&self) -> f64 {
        self.run.record_every as f64 * self.quantum.dt
    }
}
