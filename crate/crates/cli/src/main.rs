//! Command-line front end: resolves a scenario configuration from defaults,
//! an optional config file, `NPARTICLE_*` environment overrides, and flags
//! (highest precedence), then runs it and reports the summary.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use neural_particle::config::{apply_env_overrides, resolve, ConfigMap};
use neural_particle::irk::gauss_legendre;
use neural_particle::output::fmt_f64;
use neural_particle::runner::execute;

#[derive(Parser, Debug)]
#[command(
    name = "nparticle",
    about = "Meshfree neural-collocation solver for inviscid free-surface flow",
    after_help = "Scenarios: msd | static-pressure | sloshing | dambreak\n\
                  Env overrides: NPARTICLE_<KEY> (e.g. NPARTICLE_DT=0.05); flags win over env,\n\
                  env wins over the config file."
)]
struct Cli {
    /// Scenario to run (required unless --dump-tableau is given).
    scenario: Option<String>,
    /// Plain-text key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Time step override [s].
    #[arg(long)]
    dt: Option<f64>,
    /// Step count override.
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory for snapshots, series, loss history and summary.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the s-stage Gauss-Legendre tableau (17 significant digits) and
    /// exit without running a scenario.
    #[arg(long, value_name = "S")]
    dump_tableau: Option<usize>,
    /// Experimental front-tip data (CSV with header Tstar,Zstar) for the
    /// dam-break comparison table.
    #[arg(long)]
    experiment_csv: Option<PathBuf>,
}

fn dump_tableau(s: usize) -> Result<()> {
    let t = gauss_legendre(s)?;
    for (i, c) in t.c.iter().enumerate() {
        println!("c[{i}] = {}", fmt_f64(*c));
    }
    for (j, b) in t.b.iter().enumerate() {
        println!("b[{j}] = {}", fmt_f64(*b));
    }
    for (j, row) in t.a.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        println!("a[{j}] = {}", cells.join(" "));
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();

    if let Some(s) = cli.dump_tableau {
        return dump_tableau(s);
    }

    let scenario = cli
        .scenario
        .as_deref()
        .context("a scenario is required: msd | static-pressure | sloshing | dambreak")?;

    let mut map = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            ConfigMap::parse(&text)?
        }
        None => ConfigMap::empty(),
    };
    apply_env_overrides(&mut map);
    if let Some(seed) = cli.seed {
        map.set("seed", seed.to_string());
    }
    if let Some(dt) = cli.dt {
        map.set("dt", dt.to_string());
    }
    if let Some(steps) = cli.steps {
        map.set("steps", steps.to_string());
    }
    if let Some(out) = &cli.out {
        map.set("out_dir", out.display().to_string());
    }
    if let Some(csv) = &cli.experiment_csv {
        map.set("experiment_csv", csv.display().to_string());
    }

    let run = resolve(scenario, &map)?;
    let summary = execute(&run)?;

    println!(
        "{}: {} particles, {} steps of dt = {}, final loss {:e}, {:.1} s",
        summary.scenario,
        summary.particles,
        summary.steps,
        summary.dt,
        summary.final_loss,
        summary.runtime_seconds
    );
    for (key, value) in &summary.metrics {
        println!("  {key} = {value}");
    }
    if let Some(dir) = &run.out_dir {
        println!("artifacts in {}", dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
