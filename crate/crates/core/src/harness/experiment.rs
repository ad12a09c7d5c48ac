//! Replication sweeps and their comparison with the limits.
//!
//! Replicas and fluctuation paths run on the rayon pool, each on its own
//! stream, and are collected in index order; every reduction then runs
//! sequentially so results do not depend on the thread count.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::abm::{fluctuation_paths, scaled_paths, simulate, RecoveryMode, ScaledPaths, SimulationConfig, Trajectory};
use crate::clt::stats::{mean, slope, variance};
use crate::clt::{solve_clt_path, CltOptions, CltPath, CltSetup};
use crate::error::{Error, Result};
use crate::lln::{solve_lln, Grid, LlnPaths};
use crate::rng::{stream, Purpose};

/// Runs replicas `0..replicas` of `config` in parallel, in index order.
pub fn run_replicas(config: &SimulationConfig, replicas: usize) -> Result<Vec<Trajectory>> {
    (0..replicas as u64).into_par_iter().map(|k| simulate(config, k)).collect()
}

/// The limit solved at `step / refine` and sampled on the comparison grid.
pub fn limit_on_grid(config: &ExperimentConfig) -> Result<(LlnPaths, ScaledPaths)> {
    let g = &config.grid;
    let fine = Grid::new(g.horizon, g.step / g.refine as f64)?;
    let lln = solve_lln(&config.model, &config.init, &fine)?;
    let coarse = lln.subsample(g.refine)?;
    Ok((lln, coarse))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Errors of one population size.
#[derive(Debug, Clone, PartialEq)]
pub struct LlnRow {
    pub population: usize,
    pub replicas: usize,
    /// Mean over replicas of `sup_t max(|S̄ᴺ − S̄|, |Īᴺ − Ī|, |R̄ᴺ − R̄|)`.
    pub mean_error: f64,
    /// Standard error of `mean_error`.
    pub standard_error: f64,
    /// Per-compartment means of the sup errors, `S, I, R, 𝔉`.
    pub components: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlnExperiment {
    pub rows: Vec<LlnRow>,
    /// Log-log slope of the mean error against `N`.
    pub slope: f64,
}

/// Sweeps `populations` with `replicas` replicas each.
pub fn run_lln_experiment(config: &ExperimentConfig, populations: &[usize], replicas: usize) -> Result<LlnExperiment> {
    if replicas < 2 {
        return Err(Error::InsufficientReplicas(format!("{replicas} replicas give no error band")));
    }
    let (_, limit) = limit_on_grid(config)?;
    let mut rows = Vec::new();
    for &n in populations {
        let sim = config.simulation(n, config.sweep.mode);
        let runs = run_replicas(&sim, replicas)?;
        let mut errors = Vec::with_capacity(replicas);
        let mut components = [0.0; 4];
        for run in &runs {
            let bar = scaled_paths(run);
            let c = [
                sup_diff(&bar.susceptible, &limit.susceptible),
                sup_diff(&bar.infected, &limit.infected),
                sup_diff(&bar.recovered, &limit.recovered),
                sup_diff(&bar.force, &limit.force),
            ];
            errors.push(c[0].max(c[1]).max(c[2]));
            for (acc, x) in components.iter_mut().zip(c) {
                *acc += x / replicas as f64;
            }
        }
        rows.push(LlnRow {
            population: n,
            replicas,
            mean_error: mean(&errors),
            standard_error: (variance(&errors) / replicas as f64).sqrt(),
            components,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.population as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mean_error.ln()).collect();
    let slope = if rows.len() >= 2 { slope(&x, &y) } else { f64::NAN };
    Ok(LlnExperiment { rows, slope })
}

/// Grid means of `Īᴺ` under both recovery mechanisms.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeComparison {
    pub times: Vec<f64>,
    pub scheduled: Vec<f64>,
    pub hazard: Vec<f64>,
    /// Standard error of the difference of the two means.
    pub standard_error: Vec<f64>,
}

impl ModeComparison {
    /// Largest `|difference| / standard error`; a difference where the
    /// error is zero counts as infinite.
    pub fn worst_score(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.times.len() {
            let d = (self.scheduled[k] - self.hazard[k]).abs();
            let score = if self.standard_error[k] > 0.0 {
                d / self.standard_error[k]
            } else if d > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst = worst.max(score);
        }
        worst
    }
}

pub fn run_mode_comparison(config: &ExperimentConfig, population: usize, replicas: usize) -> Result<ModeComparison> {
    if replicas < 2 {
        return Err(Error::InsufficientReplicas(format!("{replicas} replicas give no error band")));
    }
    let stats = |mode| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let runs = run_replicas(&config.simulation(population, mode), replicas)?;
        let nodes = runs[0].times.len();
        let (mut m, mut v) = (Vec::with_capacity(nodes), Vec::with_capacity(nodes));
        for k in 0..nodes {
            let x: Vec<f64> = runs.iter().map(|r| r.infected[k] / population as f64).collect();
            m.push(mean(&x));
            v.push(variance(&x) / replicas as f64);
        }
        Ok((runs[0].times.clone(), m, v))
    };
    let (times, scheduled, vs) = stats(RecoveryMode::Scheduled)?;
    let (_, hazard, vh) = stats(RecoveryMode::Hazard)?;
    let standard_error = vs.iter().zip(&vh).map(|(a, b)| (a + b).sqrt()).collect();
    Ok(ModeComparison { times, scheduled, hazard, standard_error })
}

/// Fluctuation engine on the comparison grid of `config`.
pub fn clt_setup(config: &ExperimentConfig, recovery_noise: bool) -> Result<CltSetup> {
    let g = &config.grid;
    let mut options = CltOptions::new(g.horizon, g.step);
    options.refine = g.refine;
    options.recovery_noise = recovery_noise;
    CltSetup::new(&config.model, &config.init, options)
}

/// Paths `0..paths`, path `k` on stream `k` of the fluctuation family.
pub fn sample_clt_paths(setup: &CltSetup, paths: usize, seed: u64) -> Result<Vec<CltPath>> {
    (0..paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, Purpose::CltPath, k);
            let drivers = setup.sample_drivers(&mut rng, false)?;
            solve_clt_path(setup, &drivers)
        })
        .collect()
}

/// Empirical and predicted variances at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct CltRow {
    pub time: f64,
    /// `Var` of `Ŝᴺ, Îᴺ, R̂ᴺ` over replicas.
    pub simulated: [f64; 3],
    /// `Var` of `Ŝ, Î, R̂` over fluctuation paths.
    pub predicted: [f64; 3],
}

impl CltRow {
    pub fn relative(&self, k: usize) -> f64 {
        (self.simulated[k] / self.predicted[k] - 1.0).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltExperiment {
    pub population: usize,
    pub replicas: usize,
    pub paths: usize,
    pub rows: Vec<CltRow>,
    /// Empirical `Var Ŝᴺ(0)`.
    pub initial_variance: f64,
}

/// Compares fluctuation variances at `times` (which must be grid nodes).
pub fn run_clt_experiment(
    config: &ExperimentConfig,
    population: usize,
    replicas: usize,
    paths: usize,
    times: &[f64],
) -> Result<CltExperiment> {
    if replicas < 2 || paths < 2 {
        return Err(Error::InsufficientReplicas(format!("{replicas} replicas and {paths} paths")));
    }
    let setup = clt_setup(config, false)?;
    let limit = setup.lln.subsample(setup.refine)?;
    let sim = config.simulation(population, config.sweep.mode);
    let runs = run_replicas(&sim, replicas)?;
    let hats = runs.iter().map(|r| fluctuation_paths(r, &limit)).collect::<Result<Vec<_>>>()?;
    let clt = sample_clt_paths(&setup, paths, config.sweep.seed)?;
    let index = |t: f64| {
        setup.grid.index_of(t).ok_or_else(|| Error::GridMismatch(format!("{t} is not a node of the comparison grid")))
    };
    let column = |k: usize, n: usize| -> Vec<f64> {
        hats.iter()
            .map(|h| [&h.susceptible, &h.infected, &h.recovered][k][n])
            .collect()
    };
    let predicted = |k: usize, n: usize| -> Vec<f64> {
        clt.iter().map(|p| [&p.susceptible, &p.infected, &p.recovered][k][n]).collect()
    };
    let mut rows = Vec::new();
    for &t in times {
        let n = index(t)?;
        rows.push(CltRow {
            time: t,
            simulated: [0, 1, 2].map(|k| variance(&column(k, n))),
            predicted: [0, 1, 2].map(|k| variance(&predicted(k, n))),
        });
    }
    Ok(CltExperiment { population, replicas, paths, rows, initial_variance: variance(&column(0, 0)) })
}
