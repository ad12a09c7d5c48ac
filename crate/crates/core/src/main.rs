use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use agesir::abm::RecoveryMode;
use agesir::harness::commands;
use agesir::harness::ExperimentConfig;

#[derive(Parser)]
#[command(name = "agesir", version, about = "Simulate the random-infectivity SIR epidemic and check its limit theorems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every population and replica of the sweep.
    Simulate(Common),
    /// Solve the deterministic limit (and the ODE oracle for Markovian laws).
    Lln(Common),
    /// Sample Gaussian fluctuation paths and write their variances.
    Clt(Common),
    /// Run the acceptance suite; exits nonzero if a criterion fails.
    Verify(Common),
    /// Convergence sweep and fluctuation comparison as a plain-text report.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML); defaults to the Markovian reference experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Reduced sizes: N = 1000, 50 replicas, 1000 fluctuation paths.
    #[arg(long)]
    quick: bool,
    /// Recovery mechanism, overriding the config.
    #[arg(long, value_parser = ["scheduled", "hazard"])]
    mode: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::markovian(),
        };
        if self.quick {
            config = config.quick();
        }
        if let Some(seed) = self.seed {
            config.sweep.seed = seed;
        }
        if let Some(mode) = &self.mode {
            config.sweep.mode = mode.parse::<RecoveryMode>()?;
        }
        Ok(config)
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (Command::Simulate(common)
    | Command::Lln(common)
    | Command::Clt(common)
    | Command::Verify(common)
    | Command::Report(common)) = &cli.command;
    let config = common.config()?;
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("starting the thread pool")?;
    }
    let out = &common.out;
    match &cli.command {
        Command::Simulate(_) => println!("{}", commands::simulate_command(&config, out)?),
        Command::Lln(_) => println!("{}", commands::lln_command(&config, out)?),
        Command::Clt(_) => println!("{}", commands::clt_command(&config, out)?),
        Command::Report(_) => print!("{}", commands::report_command(&config, out)?.render()),
        Command::Verify(_) => {
            let report = commands::verify_command(&config, out)?;
            print!("{}", report.render());
            return Ok(report.all_passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
