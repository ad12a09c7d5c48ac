//! Experiment configuration files.
//!
//! TOML with five sections. Only `[model]` and `[init]` are required; the
//! rest fall back to the Markovian reference experiment.
//!
//! ```toml
//! [model.shape]
//! kind = "separable"
//! profile = { kind = "constant", level = 0.4 }
//!
//! [model.duration]
//! kind = "exponential"
//! rate = 0.25
//!
//! [init]
//! susceptible = 0.9
//! infected = 0.1
//! age_law = { kind = "uniform", max_age = 2.0 }
//!
//! [grid]
//! horizon = 40.0
//! step = 0.2
//!
//! [sweep]
//! populations = [500, 2000, 8000]
//! replicas = 200
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::abm::{RecoveryMode, SimulationConfig};
use crate::error::{Error, Result};
use crate::lln::Grid;
use crate::model::{AgeLaw, Coupling, DurationDistribution, InfectivityLaw, InitialCondition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub horizon: f64,
    /// Comparison grid for simulations and the fluctuation engine.
    pub step: f64,
    /// The limit is solved at `step / refine`; must be even.
    pub refine: usize,
    /// Step of the stand-alone limit solve (`lln` subcommand).
    pub lln_step: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { horizon: 40.0, step: 0.2, refine: 10, lln_step: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Population sizes of the convergence sweep, ascending.
    pub populations: Vec<usize>,
    pub replicas: usize,
    /// Population and replicas of the fluctuation comparison.
    pub clt_population: usize,
    pub clt_replicas: usize,
    /// Sampled limit fluctuation paths.
    pub paths: usize,
    pub mode: RecoveryMode,
    pub seed: u64,
    pub duration_cap: f64,
    /// Events checked by the exactness criterion.
    pub events: u64,
    /// Initial configurations drawn by the bridge criterion.
    pub initial_draws: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            populations: vec![500, 2000, 8000],
            replicas: 200,
            clt_population: 10_000,
            clt_replicas: 1000,
            paths: 10_000,
            mode: RecoveryMode::Scheduled,
            seed: 20_240_601,
            duration_cap: 1e6,
            events: 1_000_000,
            initial_draws: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Limit vs ODE: sup error at most `markov_factor · Δt²`.
    pub markov_factor: f64,
    pub markov_seconds: f64,
    pub slope_low: f64,
    pub slope_high: f64,
    /// Width of Monte Carlo bands in standard errors.
    pub sigmas: f64,
    pub variance_relative: f64,
    pub identity_gap: f64,
    pub ratio_low: f64,
    pub ratio_high: f64,
    pub spde_relative: f64,
    pub residual_factor: f64,
    /// Criteria run by `verify`.
    pub enabled: Vec<u8>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            markov_factor: 5.0,
            markov_seconds: 1.0,
            slope_low: -0.65,
            slope_high: -0.35,
            sigmas: 3.0,
            variance_relative: 0.15,
            identity_gap: 1e-4,
            ratio_low: 3.0,
            ratio_high: 5.0,
            spde_relative: 1e-8,
            residual_factor: 10.0,
            enabled: (1..=9).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: InfectivityLaw,
    pub init: InitialCondition,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    /// `λ = 0.4 · 1{t < η}`, `η ~ Exp(0.25)`, `S̄(0) = 0.9`, `Ī(0) = 0.1`, `T = 40`.
    pub fn markovian() -> Self {
        Self {
            model: InfectivityLaw::indicator(0.4, DurationDistribution::exponential(0.25)),
            init: InitialCondition {
                susceptible: 0.9,
                infected: 0.1,
                recovered: 0.0,
                age_law: AgeLaw::Uniform { max_age: 2.0 },
                coupling: Coupling::Residual,
            },
            grid: GridSection::default(),
            sweep: SweepSection::default(),
            tolerances: Tolerances::default(),
        }
    }

    /// The reduced sizes used by `--quick`.
    pub fn quick(mut self) -> Self {
        let s = &mut self.sweep;
        s.populations = vec![250, 500, 1000];
        s.replicas = 50;
        s.clt_population = 1000;
        s.clt_replicas = 50;
        s.paths = 1000;
        s.events = 100_000;
        s.initial_draws = 1000;
        self
    }

    /// `(β, γ)` when the law is `β · 1{t < η}` with exponential `η`.
    pub fn markovian_rates(&self) -> Option<(f64, f64)> {
        use crate::model::{InfectivityShape, Profile};
        match (&self.model.shape, &self.model.duration) {
            (
                InfectivityShape::Separable { profile: Profile::Constant { level } },
                DurationDistribution::Exponential { rate },
            ) => Some((*level, *rate)),
            _ => None,
        }
    }

    /// Parses and validates TOML text; errors carry the offending line.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
            Error::Config(format!("line {line}: {}", e.message().trim()))
        })?;
        config.validate().map_err(|(key, msg)| Error::Config(format!("line {}: {msg}", key_line(text, key))))?;
        Ok(config)
    }

    /// Reads a config file; errors are prefixed with its path.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks every section; on failure returns the key to anchor the
    /// message to.
    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        self.model.validate().map_err(|e| ("kind", e.to_string()))?;
        self.init.validate().map_err(|e| ("susceptible", e.to_string()))?;
        if self.init.coupling == Coupling::Residual {
            self.init.check_conditioning(&self.model.duration).map_err(|e| ("age_law", e.to_string()))?;
        }
        let g = &self.grid;
        Grid::new(g.horizon, g.step).map_err(|e| ("step", e.to_string()))?;
        Grid::new(g.horizon, g.lln_step).map_err(|e| ("lln_step", e.to_string()))?;
        if g.refine == 0 || g.refine % 2 != 0 {
            return Err(("refine", format!("refine must be a positive even number, got {}", g.refine)));
        }
        let s = &self.sweep;
        if s.populations.is_empty() || s.populations.contains(&0) {
            return Err(("populations", "populations must be a non-empty list of positive sizes".into()));
        }
        if s.populations.windows(2).any(|w| w[1] <= w[0]) {
            return Err(("populations", format!("populations must be ascending, got {:?}", s.populations)));
        }
        if s.replicas < 2 || s.clt_replicas < 2 {
            return Err(("replicas", "at least two replicas are needed for Monte Carlo bands".into()));
        }
        if s.paths < 2 {
            return Err(("paths", "at least two fluctuation paths are needed".into()));
        }
        if s.clt_population == 0 {
            return Err(("clt_population", "clt_population must be positive".into()));
        }
        if let Some(bad) = self.tolerances.enabled.iter().find(|&&c| !(1..=9).contains(&c)) {
            return Err(("enabled", format!("unknown criterion {bad}; criteria are numbered 1 to 9")));
        }
        Ok(())
    }

    /// Simulation settings for population `n`. The seed mixes in `n` and the
    /// mode so different sweeps use independent streams.
    pub fn simulation(&self, n: usize, mode: RecoveryMode) -> SimulationConfig {
        let mut c = SimulationConfig::new(n, self.init.clone(), self.model.clone(), self.grid.horizon, self.grid.step);
        c.mode = mode;
        c.duration_cap = self.sweep.duration_cap;
        let tag = (n as u64) << 1 | (mode == RecoveryMode::Hazard) as u64;
        c.seed = self.sweep.seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        c
    }

    pub fn comparison_grid(&self) -> Grid {
        Grid::new(self.grid.horizon, self.grid.step).expect("validated")
    }

    /// `T/4, T/2, 3T/4`, each moved to the nearest comparison node.
    pub fn quarter_nodes(&self) -> [f64; 3] {
        let step = self.grid.step;
        [0.25, 0.5, 0.75].map(|q| (q * self.grid.horizon / step).round() * step)
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key =` assignment, or 1.
fn key_line(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map_or(1, |i| i + 1)
}
