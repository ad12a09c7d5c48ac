//! Exact event-driven simulation of the `N`-individual epidemic.
//!
//! Two recovery mechanisms are available. `Scheduled` draws each infectious
//! period up front and queues the recovery. `Hazard` never draws durations:
//! recoveries arrive by thinning a clock of rate `I·h*` and the recovering
//! individual is picked with the hazard-biased inverse of the age measure.
//! Infections are thinned against `B = (S/N)·λ*·I` in both modes.

mod sim;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InfectivityLaw, InitialCondition};
use crate::rng::{stream, Purpose, Stream};

pub use sim::simulate_with;

/// How recoveries are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryMode {
    #[default]
    Scheduled,
    Hazard,
}

impl std::str::FromStr for RecoveryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scheduled" => Ok(Self::Scheduled),
            "hazard" => Ok(Self::Hazard),
            other => Err(Error::Config(format!("unknown mode `{other}` (expected scheduled or hazard)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub population: usize,
    pub init: InitialCondition,
    pub law: InfectivityLaw,
    pub horizon: f64,
    pub step: f64,
    pub mode: RecoveryMode,
    pub seed: u64,
    /// Durations above this abort the run.
    pub duration_cap: f64,
    pub record_events: bool,
}

impl SimulationConfig {
    pub fn new(population: usize, init: InitialCondition, law: InfectivityLaw, horizon: f64, step: f64) -> Self {
        Self {
            population,
            init,
            law,
            horizon,
            step,
            mode: RecoveryMode::Scheduled,
            seed: 0,
            duration_cap: 1e6,
            record_events: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 {
            return Err(Error::Config("population must be at least 1".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.step > 0.0 && self.step <= self.horizon) {
            return Err(Error::Config(format!("grid step must lie in (0, T], got {}", self.step)));
        }
        self.init.validate()?;
        self.law.validate()?;
        if self.init.coupling == crate::model::Coupling::Residual {
            self.init.check_conditioning(&self.law.duration)?;
        }
        if self.mode == RecoveryMode::Hazard {
            if self.law.separable_profile().is_none() {
                return Err(Error::Config(
                    "hazard mode needs a separable infectivity law λ̃(t)·1{t < η} with deterministic λ̃".into(),
                ));
            }
            if self.hazard_bound().is_none() {
                return Err(Error::Config("hazard mode needs a bounded hazard on [0, T + ā]".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn hazard_bound(&self) -> Option<f64> {
        self.law.duration.hazard_bound(self.horizon + self.init.age_law.max_age())
    }

    pub fn node_count(&self) -> usize {
        (self.horizon / self.step).round() as usize + 1
    }

    /// Initial counts `(S, I, R)` from integer parts of the fractions.
    pub fn initial_counts(&self) -> (usize, usize, usize) {
        let n = self.population as f64;
        let i = (n * self.init.infected + 1e-9).floor() as usize;
        let s = ((n * self.init.susceptible + 1e-9).floor() as usize).min(self.population - i);
        (s, i, self.population - s - i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Infection,
    Recovery,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Infection => "infection",
            Self::Recovery => "recovery",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub id: u64,
    pub seq: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub events: u64,
    pub infections: u64,
    pub recoveries: u64,
    pub proposals: u64,
    /// Largest true-rate / bound ratio seen by any thinning step.
    pub max_acceptance_ratio: f64,
}

/// Grid samples (left limits at the nodes) plus an optional event log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub population: usize,
    pub step: f64,
    pub times: Vec<f64>,
    pub susceptible: Vec<f64>,
    pub infected: Vec<f64>,
    pub recovered: Vec<f64>,
    pub force: Vec<f64>,
    pub rate: Vec<f64>,
    pub events: Vec<Event>,
    /// Remaining durations `η⁰ⱼ` of the initially infected (scheduled mode).
    pub initial_remaining: Vec<f64>,
    /// `(S, I, R)` after the last processed event.
    pub final_state: (usize, usize, usize),
    pub diagnostics: Diagnostics,
}

/// LLN-scaled or CLT-scaled grid paths.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScaledPaths {
    pub times: Vec<f64>,
    pub susceptible: Vec<f64>,
    pub infected: Vec<f64>,
    pub recovered: Vec<f64>,
    pub force: Vec<f64>,
    pub rate: Vec<f64>,
}

/// Runs replica `replica` of `config` on its own stream.
pub fn simulate(config: &SimulationConfig, replica: u64) -> Result<Trajectory> {
    let mut rng = stream(config.seed, Purpose::Replica, replica);
    simulate_with(config, &mut rng)
}

/// Scheduled-mode entry point.
pub fn simulate_scheduled(config: &SimulationConfig, rng: &mut Stream) -> Result<Trajectory> {
    let cfg = SimulationConfig { mode: RecoveryMode::Scheduled, ..config.clone() };
    simulate_with(&cfg, rng)
}

/// Hazard-mode entry point.
pub fn simulate_hazard(config: &SimulationConfig, rng: &mut Stream) -> Result<Trajectory> {
    let cfg = SimulationConfig { mode: RecoveryMode::Hazard, ..config.clone() };
    simulate_with(&cfg, rng)
}

/// `X̄ᴺ = Xᴺ / N` on the grid.
pub fn scaled_paths(traj: &Trajectory) -> ScaledPaths {
    let n = traj.population as f64;
    let scale = |v: &[f64]| v.iter().map(|x| x / n).collect();
    ScaledPaths {
        times: traj.times.clone(),
        susceptible: scale(&traj.susceptible),
        infected: scale(&traj.infected),
        recovered: scale(&traj.recovered),
        force: scale(&traj.force),
        // Υᴺ = (S/N)·𝔉ᴺ is already of order N; its scaled version is Υᴺ/N
        rate: scale(&traj.rate),
    }
}

/// `X̂ᴺ = √N (X̄ᴺ − X̄)` against a limit sampled on the same grid.
pub fn fluctuation_paths(traj: &Trajectory, limit: &ScaledPaths) -> Result<ScaledPaths> {
    if traj.times.len() != limit.times.len() {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} nodes, limit has {}",
            traj.times.len(),
            limit.times.len()
        )));
    }
    if let Some((a, b)) = traj.times.iter().zip(&limit.times).find(|(a, b)| (*a - *b).abs() > 1e-9 * (1.0 + a.abs())) {
        return Err(Error::GridMismatch(format!("node {a} does not match {b}")));
    }
    let bar = scaled_paths(traj);
    let root = (traj.population as f64).sqrt();
    let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| root * (a - b)).collect();
    Ok(ScaledPaths {
        times: traj.times.clone(),
        susceptible: diff(&bar.susceptible, &limit.susceptible),
        infected: diff(&bar.infected, &limit.infected),
        recovered: diff(&bar.recovered, &limit.recovered),
        force: diff(&bar.force, &limit.force),
        rate: diff(&bar.rate, &limit.rate),
    })
}

impl Trajectory {
    /// Event log as CSV with columns `time,kind,id`.
    pub fn write_events_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "kind", "id"])?;
        for e in &self.events {
            w.write_record([format!("{:.17e}", e.time), e.kind.as_str().to_string(), e.id.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Grid samples as CSV with columns `t,S,I,R,F,Upsilon`.
    pub fn write_grid_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "S", "I", "R", "F", "Upsilon"])?;
        for k in 0..self.times.len() {
            w.write_record([
                format!("{}", self.times[k]),
                format!("{}", self.susceptible[k]),
                format!("{}", self.infected[k]),
                format!("{}", self.recovered[k]),
                format!("{}", self.force[k]),
                format!("{}", self.rate[k]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
