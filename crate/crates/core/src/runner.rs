//! Executes a resolved run end to end and produces the machine-readable
//! summary.

use std::time::Instant;

use crate::config::{RunConfig, ScenarioSpec};
use crate::diagnostics::{
    hydrostatic_rms_error, max_displacement, max_speed, max_wall_gap, measure_period,
};
use crate::output::{read_experiment_csv, write_summary, RunSummary};
use crate::physics::FluidProperties;
use crate::scenario::{run_container, run_dambreak, run_msd, EmitOptions, ScenarioError};

fn emit_options(run: &RunConfig) -> EmitOptions {
    EmitOptions {
        out_dir: run.out_dir.clone(),
        snapshot_interval: run.snapshot_interval,
        checkpoint: run.checkpoint,
    }
}

/// Runs the scenario, computes its headline metrics, and writes
/// `summary.json` (plus all scenario artifacts) when an output directory is
/// configured.
pub fn execute(run: &RunConfig) -> Result<RunSummary, ScenarioError> {
    let emit = emit_options(run);
    let started = Instant::now();
    let mut summary = match &run.scenario {
        ScenarioSpec::Msd(cfg) => {
            let r = run_msd(cfg, &emit)?;
            let mut s = base_summary(run, &cfg.layout, cfg.layout.last().unwrap() - 1, cfg.dt, cfg.steps, 1, r.final_loss);
            s.metric("max_error", r.max_error);
            s.metric("final_q", *r.q.last().unwrap());
            s
        }
        ScenarioSpec::StaticPressure(cfg) => {
            let r = run_container(cfg, &emit)?;
            let props = FluidProperties {
                rho: cfg.rho,
                body_accel: [0.0, -cfg.gravity],
            };
            let stages = cfg.stages().unwrap_or(0);
            let mut s = base_summary(
                run,
                &cfg.layout,
                stages,
                cfg.dt,
                cfg.steps,
                r.particles.len(),
                r.final_loss,
            );
            s.metric(
                "pressure_rms_error",
                hydrostatic_rms_error(&r.particles, &props, cfg.h),
            );
            s.metric("max_wall_gap", max_wall_gap(&r.particles, cfg.w));
            s.metric("max_speed", max_speed(&r.particles));
            s.metric(
                "max_displacement",
                max_displacement(&r.initial_positions, &r.particles.positions),
            );
            s
        }
        ScenarioSpec::Sloshing(cfg) => {
            let r = run_container(cfg, &emit)?;
            let stages = cfg.stages().unwrap_or(0);
            let mut s = base_summary(
                run,
                &cfg.layout,
                stages,
                cfg.dt,
                cfg.steps,
                r.particles.len(),
                r.final_loss,
            );
            let times: Vec<f64> = r.series.iter().map(|row| row.t).collect();
            let amps: Vec<f64> = r.series.iter().map(|row| row.amplitude).collect();
            if let Some(period) = measure_period(&times, &amps) {
                s.metric("period", period);
            }
            if let Some(first) = r.series.first() {
                let pp0 = first.e_pressure + first.e_potential;
                let tot0 = first.e_total;
                let mut pp_var = 0.0f64;
                let mut tot_var = 0.0f64;
                for row in &r.series {
                    let pp = row.e_pressure + row.e_potential;
                    pp_var = pp_var.max((pp - pp0).abs() / pp0.abs().max(1e-300));
                    tot_var = tot_var.max((row.e_total - tot0).abs() / tot0.abs().max(1e-300));
                }
                s.metric("pressure_potential_variation", pp_var);
                s.metric("total_energy_variation", tot_var);
            }
            s.metric("max_wall_gap", max_wall_gap(&r.particles, cfg.w));
            s.metric(
                "final_amplitude",
                r.series.last().map(|row| row.amplitude).unwrap_or(0.0),
            );
            s
        }
        ScenarioSpec::DamBreak(cfg) => {
            let experiment = match &run.experiment_csv {
                Some(path) => Some(read_experiment_csv(path)?),
                None => None,
            };
            let r = run_dambreak(cfg, &emit, experiment.as_deref())?;
            let stages = crate::network::OutputSchema::fluid_stages_for_width(
                2,
                *cfg.layout.last().unwrap(),
            )
            .unwrap_or(0);
            let mut s = base_summary(
                run,
                &cfg.layout,
                stages,
                cfg.dt,
                cfg.steps,
                r.particles.len(),
                r.final_loss,
            );
            s.metric("zstar_final", r.tstar_zstar.last().unwrap().1);
            let min_y = (0..r.particles.len())
                .map(|i| r.particles.positions[[i, 1]])
                .fold(f64::INFINITY, f64::min);
            s.metric("min_y", min_y);
            let monotone = r
                .front
                .windows(2)
                .all(|w| w[1].1 >= w[0].1 - 1e-12);
            s.metric("front_monotone", if monotone { 1.0 } else { 0.0 });
            if !r.comparison.is_empty() {
                let max_rel = r
                    .comparison
                    .iter()
                    .fold(0.0f64, |m, row| m.max(row.rel_diff));
                s.metric("experiment_max_rel_diff", max_rel);
            }
            s
        }
    };

    summary.runtime_seconds = started.elapsed().as_secs_f64();
    if let Some(dir) = &run.out_dir {
        write_summary(&dir.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn base_summary(
    run: &RunConfig,
    layout: &[usize],
    stages: usize,
    dt: f64,
    steps: usize,
    particles: usize,
    final_loss: f64,
) -> RunSummary {
    let seed = match &run.scenario {
        ScenarioSpec::Msd(c) => c.seed,
        ScenarioSpec::StaticPressure(c) | ScenarioSpec::Sloshing(c) => c.seed,
        ScenarioSpec::DamBreak(c) => c.seed,
    };
    RunSummary {
        scenario: run.scenario_name.clone(),
        seed,
        layout: layout.to_vec(),
        stages,
        dt,
        steps,
        particles,
        final_loss,
        metrics: serde_json::Map::new(),
        runtime_seconds: 0.0,
    }
}
