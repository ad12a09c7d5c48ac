//! The `agesir` binary end to end, on small experiments.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[model.shape]
kind = "separable"
profile = { kind = "constant", level = 0.4 }

[model.duration]
kind = "exponential"
rate = 0.25

[init]
susceptible = 0.9
infected = 0.1
age_law = { kind = "uniform", max_age = 2.0 }

[grid]
horizon = 10.0
step = 0.2
refine = 10
lln_step = 0.01

[sweep]
populations = [200, 400]
replicas = 6
clt_population = 400
clt_replicas = 8
paths = 40
seed = 7
initial_draws = 500
events = 20000

[tolerances]
enabled = [1, 5, 6, 7, 9]
"#;

fn agesir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agesir")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_in(dir: &Path, sub: &str, out: &str, extra: &[&str]) -> Output {
    let config = write_config(dir, SMALL);
    let out = dir.join(out);
    let mut args = vec![sub, "--config", &config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = agesir(&args);
    assert!(o.status.success(), "{sub} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

#[test]
fn unknown_subcommand_prints_usage_and_fails() {
    let o = agesir(&["frobnicate"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn malformed_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("replicas = 6", "replicas = \"six\"");
    let config = write_config(dir.path(), &bad);
    let o = agesir(&["lln", "--config", &config, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    let line = bad.lines().position(|l| l.contains("\"six\"")).unwrap() + 1;
    assert!(err.contains(&format!("line {line}:")), "{err}");
}

#[test]
fn invalid_value_reports_the_line_of_its_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("refine = 10", "refine = 3");
    let config = write_config(dir.path(), &bad);
    let o = agesir(&["clt", "--config", &config, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let line = bad.lines().position(|l| l.starts_with("refine")).unwrap() + 1;
    assert!(String::from_utf8_lossy(&o.stderr).contains(&format!("line {line}:")));
}

#[test]
fn lln_writes_the_limit_and_the_ode_oracle() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "lln", "o", &[]);
    let lln = fs::read_to_string(dir.path().join("o/lln.csv")).unwrap();
    let ode = fs::read_to_string(dir.path().join("o/ode_oracle.csv")).unwrap();
    assert!(ode.starts_with("t,S,I,R\n"));
    assert_eq!(lln.lines().count(), ode.lines().count());
    assert_eq!(ode.lines().count(), 1 + 1001);
}

#[test]
fn equal_seeds_give_identical_files_whatever_the_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    for (out, threads) in [("a", "1"), ("b", "4")] {
        run_in(dir.path(), "simulate", out, &["--threads", threads]);
        run_in(dir.path(), "clt", out, &["--threads", threads]);
    }
    for name in ["trajectories.csv", "events.csv", "clt_paths.csv", "clt_drivers.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert!(!a.is_empty());
        assert!(a == b, "{name} differs between thread counts");
    }
    run_in(dir.path(), "simulate", "c", &["--seed", "8"]);
    let a = fs::read(dir.path().join("a/trajectories.csv")).unwrap();
    let c = fs::read(dir.path().join("c/trajectories.csv")).unwrap();
    assert!(a != c, "a different seed should change the sample");
}

#[test]
fn hazard_mode_runs_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "simulate", "h", &["--mode", "hazard"]);
    let t = fs::read_to_string(dir.path().join("h/trajectories.csv")).unwrap();
    assert!(t.starts_with("N,replica,t,S,I,R,F,Upsilon\n"));
}

#[test]
fn verify_runs_the_enabled_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "verify", "v", &[]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("criterion ")).count(), 5, "{stdout}");
    let csv = fs::read_to_string(dir.path().join("v/criteria.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().skip(1).all(|l| l.contains(",true,")), "{csv}");
}

#[test]
fn report_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "report", "r", &[]);
    for name in ["report.txt", "lln_errors.csv", "clt_variances.csv", "mode_comparison.csv", "limit.csv"] {
        assert!(dir.path().join("r").join(name).exists(), "{name} missing");
    }
}
