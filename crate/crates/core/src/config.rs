//! Run configuration shared by the command line and the harness.
//!
//! A configuration is a TOML document with one table per concern:
//!
//! ```toml
//! [w]
//! drift = 1.0
//! atoms = [[0.5, 1.0]]
//!
//! [model]
//! a = 0.3
//! seed = 2024
//!
//! [initial]
//! kind = "cosine"
//! mean = 0.5
//! amplitude = 0.3
//!
//! [converge]
//! grid_sizes = [64, 128, 256, 512]
//! replicas = 50
//! ```
//!
//! Every field has a default, so an empty document is a valid configuration.
//! A manifest written by a run stores the resolved configuration under
//! `[config]`; [`RunConfig::load`] accepts such a manifest as input.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particle::validate_asymmetry;
use crate::pde::{InitialProfile, PhiConfig, PhiSpec, SolverConfig};
use crate::wfun::{WConfig, WSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Speed-change parameter `a > -1/2`.
    pub a: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { a: 0.3, seed: 2024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    /// Source location for Green's function solves.
    pub y: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 256, y: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdeConfig {
    #[serde(flatten)]
    pub solver: SolverConfig,
    pub times: Vec<f64>,
}

impl Default for PdeConfig {
    fn default() -> Self {
        PdeConfig {
            solver: SolverConfig::default(),
            times: vec![0.0, 0.02, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub replicas: usize,
    pub times: Vec<f64>,
    pub box_len: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            replicas: 10,
            times: vec![0.0, 0.02, 0.1],
            box_len: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeConfig {
    pub grid_sizes: Vec<usize>,
    pub replicas: usize,
    /// Fourier modes `k`; mode 0 is the constant, `k >= 1` gives cosine and sine.
    pub modes: Vec<u32>,
    pub times: Vec<f64>,
    /// Coarse-graining box length `εN`, in sites.
    pub box_len: usize,
    /// The reference grid has `ref_factor · max(grid_sizes)` sites.
    pub ref_factor: usize,
    pub pde_dt: f64,
    /// Move atoms that sit on grid points slightly to the right.
    pub jitter: bool,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            grid_sizes: vec![64, 128, 256, 512],
            replicas: 50,
            modes: vec![0, 1, 2, 4],
            times: vec![0.02, 0.1],
            box_len: 16,
            ref_factor: 4,
            pde_dt: 1e-5,
            jitter: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub w: WConfig,
    pub model: ModelConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiConfig>,
    pub initial: InitialProfile,
    pub grid: GridConfig,
    pub pde: PdeConfig,
    pub simulate: SimulateConfig,
    pub converge: ConvergeConfig,
}

#[derive(Deserialize)]
struct ManifestView {
    config: RunConfig,
}

impl RunConfig {
    /// Parses a configuration, or the `[config]` table of a manifest.
    pub fn from_toml(text: &str) -> Result<Self> {
        let value: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if value.contains_key("config") {
            let view: ManifestView =
                toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
            return Ok(view.config);
        }
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`; the name `default` (when no such file exists) yields the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        if path.as_os_str() == "default" && !path.exists() {
            return Ok(RunConfig::default());
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.initial = cfg.initial.resolve(Some(dir))?;
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn wspec(&self) -> Result<WSpec> {
        self.w.build()
    }

    /// `Φ` from `[phi]`, or `α + aα²` when absent.
    pub fn phi_spec(&self) -> Result<PhiSpec> {
        match &self.phi {
            Some(p) => p.build(),
            None => PhiSpec::quadratic(self.model.a),
        }
    }

    /// Checks every precondition that does not require running anything.
    pub fn validate(&self) -> Result<()> {
        validate_asymmetry(self.model.a)?;
        self.wspec()?;
        let phi = self.phi_spec()?;
        if !matches!(self.initial, InitialProfile::File { .. }) {
            self.initial.validate(phi.l(), phi.r())?;
        }
        if self.grid.n < 2 {
            return Err(Error::Config(format!("grid.n must be >= 2, got {}", self.grid.n)));
        }
        if !(self.grid.y > 0.0 && self.grid.y < 1.0) {
            return Err(Error::Config(format!("grid.y must lie in (0, 1), got {}", self.grid.y)));
        }
        check_times("pde.times", &self.pde.times)?;
        check_times("simulate.times", &self.simulate.times)?;
        if self.simulate.replicas == 0 {
            return Err(Error::Config("simulate.replicas must be >= 1".into()));
        }
        self.converge.validate()
    }
}

impl ConvergeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_sizes.is_empty() || self.grid_sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "converge.grid_sizes must be strictly increasing, got {:?}",
                self.grid_sizes
            )));
        }
        if self.grid_sizes[0] < 2 {
            return Err(Error::Config("converge.grid_sizes must be >= 2".into()));
        }
        if self.replicas == 0 {
            return Err(Error::Config("converge.replicas must be >= 1".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("converge.modes must not be empty".into()));
        }
        check_times("converge.times", &self.times)?;
        if self.box_len < 4 || self.box_len > self.grid_sizes[0] {
            return Err(Error::Config(format!(
                "converge.box_len must lie in 4..={}, got {}",
                self.grid_sizes[0], self.box_len
            )));
        }
        if self.ref_factor == 0 || !(self.pde_dt > 0.0) {
            return Err(Error::Config("converge.ref_factor and pde_dt must be positive".into()));
        }
        Ok(())
    }
}

fn check_times(name: &str, times: &[f64]) -> Result<()> {
    if times.is_empty()
        || times.iter().any(|t| !(t.is_finite() && *t >= 0.0))
        || times.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::Config(format!(
            "{name} must be nonnegative and strictly increasing, got {times:?}"
        )));
    }
    Ok(())
}
