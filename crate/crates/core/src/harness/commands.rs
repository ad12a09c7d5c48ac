//! What each subcommand computes and writes.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::acceptance::run_all;
use super::config::ExperimentConfig;
use super::experiment::{clt_setup, limit_on_grid, run_clt_experiment, run_lln_experiment, run_mode_comparison, run_replicas, sample_clt_paths};
use super::report::{clt_table, lln_table, mode_table, Report, Table};
use crate::abm::simulate;
use crate::clt::stats::{mean, variance};
use crate::error::Result;
use crate::lln::{markovian_ode_oracle, solve_lln, Grid};
use crate::model::DurationDistribution;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// `trajectories.csv` for every population and replica, and `events.csv`
/// for the first replica of the smallest population.
pub fn simulate_command(config: &ExperimentConfig, out: &Path) -> Result<String> {
    let mut w = csv::Writer::from_writer(create(out, "trajectories.csv")?);
    w.write_record(["N", "replica", "t", "S", "I", "R", "F", "Upsilon"])?;
    for &n in &config.sweep.populations {
        let runs = run_replicas(&config.simulation(n, config.sweep.mode), config.sweep.replicas)?;
        for (k, run) in runs.iter().enumerate() {
            for j in 0..run.times.len() {
                w.write_record([
                    n.to_string(),
                    k.to_string(),
                    format!("{}", run.times[j]),
                    format!("{}", run.susceptible[j]),
                    format!("{}", run.infected[j]),
                    format!("{}", run.recovered[j]),
                    format!("{}", run.force[j]),
                    format!("{}", run.rate[j]),
                ])?;
            }
        }
    }
    w.flush()?;
    let mut sim = config.simulation(config.sweep.populations[0], config.sweep.mode);
    sim.record_events = true;
    let run = simulate(&sim, 0)?;
    run.write_events_csv(create(out, "events.csv")?)?;
    Ok(format!(
        "simulated {} replicas at N = {:?}; first log has {} events",
        config.sweep.replicas,
        config.sweep.populations,
        run.events.len()
    ))
}

/// `lln.csv` at the limit step, plus `ode_oracle.csv` for Markovian laws.
pub fn lln_command(config: &ExperimentConfig, out: &Path) -> Result<String> {
    let grid = Grid::new(config.grid.horizon, config.grid.lln_step)?;
    let lln = solve_lln(&config.model, &config.init, &grid)?;
    lln.write_csv(create(out, "lln.csv")?)?;
    let Some((beta, gamma)) = config.markovian_rates() else {
        return Ok(format!("solved the limit on {} nodes", grid.len()));
    };
    let i = &config.init;
    let ode = markovian_ode_oracle(beta, gamma, i.susceptible, i.infected, i.recovered, &grid);
    let mut w = csv::Writer::from_writer(create(out, "ode_oracle.csv")?);
    w.write_record(["t", "S", "I", "R"])?;
    let mut sup: f64 = 0.0;
    for k in 0..grid.len() {
        w.write_record([
            format!("{}", ode.times[k]),
            format!("{:.15e}", ode.susceptible[k]),
            format!("{:.15e}", ode.infected[k]),
            format!("{:.15e}", ode.recovered[k]),
        ])?;
        sup = sup
            .max((lln.susceptible[k] - ode.susceptible[k]).abs())
            .max((lln.infected[k] - ode.infected[k]).abs())
            .max((lln.recovered[k] - ode.recovered[k]).abs());
    }
    w.flush()?;
    Ok(format!("solved the limit on {} nodes; sup difference to the ODE {sup:.3e}", grid.len()))
}

/// `clt_paths.csv` (mean and variance of every fluctuation path over the
/// sampled paths) and `clt_drivers.csv` (closed-form driver variances).
pub fn clt_command(config: &ExperimentConfig, out: &Path) -> Result<String> {
    let setup = clt_setup(config, false)?;
    let paths = sample_clt_paths(&setup, config.sweep.paths, config.sweep.seed)?;
    let mut t = Table::new(
        "clt_paths",
        String::new(),
        &["t", "mean_S", "var_S", "mean_F", "var_F", "mean_Upsilon", "var_Upsilon", "mean_I", "var_I", "mean_R", "var_R"],
    );
    for n in 0..setup.len() {
        let mut row = vec![format!("{}", setup.grid.time(n))];
        for pick in [
            |p: &crate::clt::CltPath, n: usize| p.susceptible[n],
            |p: &crate::clt::CltPath, n: usize| p.force[n],
            |p: &crate::clt::CltPath, n: usize| p.rate[n],
            |p: &crate::clt::CltPath, n: usize| p.infected[n],
            |p: &crate::clt::CltPath, n: usize| p.recovered[n],
        ] {
            let x: Vec<f64> = paths.iter().map(|p| pick(p, n)).collect();
            row.push(format!("{:.6e}", mean(&x)));
            row.push(format!("{:.6e}", variance(&x)));
        }
        t.push(row);
    }
    t.write_csv(create(out, "clt_paths.csv")?)?;
    let mut d = Table::new("clt_drivers", String::new(), &["t", "var_S1", "var_F1", "var_I_inf", "var_R1"]);
    for n in 0..setup.len() {
        d.push(vec![
            format!("{}", setup.grid.time(n)),
            format!("{:.6e}", setup.cov_s1(n, n)),
            format!("{:.6e}", setup.var_f1(n)),
            format!("{:.6e}", setup.var_i_inf(n)),
            format!("{:.6e}", setup.var_r1(n)),
        ]);
    }
    d.write_csv(create(out, "clt_drivers.csv")?)?;
    Ok(format!("sampled {} fluctuation paths on {} nodes", paths.len(), setup.len()))
}

/// Convergence sweep and fluctuation comparison as a report.
pub fn report_command(config: &ExperimentConfig, out: &Path) -> Result<Report> {
    let s = &config.sweep;
    let (lln, _) = limit_on_grid(config)?;
    let mut limit = Table::new(
        "limit",
        format!("Limit on the comparison grid (solved at step {})", lln.grid.step),
        &["t", "S", "I", "R", "F"],
    );
    let coarse = lln.subsample(config.grid.refine)?;
    for k in 0..coarse.times.len() {
        limit.push(vec![
            format!("{}", coarse.times[k]),
            format!("{:.6e}", coarse.susceptible[k]),
            format!("{:.6e}", coarse.infected[k]),
            format!("{:.6e}", coarse.recovered[k]),
            format!("{:.6e}", coarse.force[k]),
        ]);
    }
    let sweep = run_lln_experiment(config, &s.populations, s.replicas)?;
    let clt = run_clt_experiment(config, s.clt_population, s.clt_replicas, s.paths, &config.quarter_nodes())?;
    let mut tables = vec![lln_table(&sweep), clt_table(&clt)];
    if matches!(config.model.duration, DurationDistribution::Exponential { .. }) && config.model.separable_profile().is_some() {
        let n = s.populations[s.populations.len() / 2];
        tables.push(mode_table(&run_mode_comparison(config, n, s.replicas)?));
    }
    tables.push(limit);
    let report = Report {
        title: format!("Experiment report (seed {}, {:?} recoveries)", s.seed, s.mode),
        tables,
        criteria: Vec::new(),
    };
    report.write(out)?;
    Ok(report)
}

/// Runs the enabled criteria and writes `report.txt` and `criteria.csv`.
pub fn verify_command(config: &ExperimentConfig, out: &Path) -> Result<Report> {
    let report = Report {
        title: format!("Acceptance suite (seed {})", config.sweep.seed),
        tables: Vec::new(),
        criteria: run_all(config),
    };
    report.write(out)?;
    Ok(report)
}
