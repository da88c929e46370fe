//! The experiments: mass-spring-damper ODE, static pressure, sloshing,
//! dam break — setup, per-step training loop, and diagnostics.

pub mod container;
pub mod dambreak;
pub mod msd;
pub mod seeding;

pub use container::{run_container, ContainerConfig, ContainerResult};
pub use dambreak::{run_dambreak, ComparisonRow, DamBreakConfig, DamBreakResult};
pub use msd::{run_msd, MsdConfig, MsdProblem, MsdResult};
pub use seeding::{seed_particles, surface_elevation, Distribution, SeedSpec};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::irk::TableauError;
use crate::network::{NetworkError, NetworkLayout, NetworkParams, OutputSchema};
use crate::optim::{train, LbfgsOptions, OptimError, TrainPhase, TrainReport, TrainSchedule};
use crate::output::{LossRow, Phase};
use crate::physics::{
    advance_step, evaluate_stages, FluidOracle, FluidSetup, LossBreakdown, ParticleSet,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Step(#[from] crate::physics::StepError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("over-critical damping D = {0}; the analytic solution requires D < 1")]
    OverCriticalDamping(f64),
    #[error("particle count {0} below the minimum of 4")]
    TooFewParticles(usize),
}

/// Per-step optimizer schedule. The first step trains from the initializer;
/// later steps warm-start from the previous step's parameters and need far
/// fewer Adam iterations.
#[derive(Debug, Clone, Copy)]
pub struct TrainingConfig {
    pub adam_iters_first: usize,
    pub adam_iters: usize,
    pub adam_lr: f64,
    pub lbfgs_max_iter_first: usize,
    pub lbfgs_max_iter: usize,
    pub lbfgs_g_tol: f64,
    pub lbfgs_f_tol: f64,
}

impl TrainingConfig {
    pub fn fluid_default() -> Self {
        TrainingConfig {
            adam_iters_first: 1000,
            adam_iters: 0,
            adam_lr: 1e-3,
            lbfgs_max_iter_first: 6000,
            lbfgs_max_iter: 1000,
            lbfgs_g_tol: 1e-9,
            lbfgs_f_tol: 1e-12,
        }
    }

    /// 100 Adam iterations at learning rate 0.001, then L-BFGS until
    /// convergence.
    pub fn msd_default() -> Self {
        TrainingConfig {
            adam_iters_first: 100,
            adam_iters: 100,
            adam_lr: 1e-3,
            lbfgs_max_iter_first: 5000,
            lbfgs_max_iter: 5000,
            lbfgs_g_tol: 1e-9,
            lbfgs_f_tol: 1e-12,
        }
    }

    pub fn schedule(&self, first_step: bool) -> TrainSchedule {
        TrainSchedule {
            adam_iters: if first_step {
                self.adam_iters_first
            } else {
                self.adam_iters
            },
            adam_lr: self.adam_lr,
            lbfgs: LbfgsOptions {
                max_iter: if first_step {
                    self.lbfgs_max_iter_first
                } else {
                    self.lbfgs_max_iter
                },
                g_tol: self.lbfgs_g_tol,
                f_tol: self.lbfgs_f_tol,
                ..LbfgsOptions::default()
            },
        }
    }
}

/// Where (and whether) run artifacts are written.
#[derive(Debug, Clone, Default)]
pub struct EmitOptions {
    pub out_dir: Option<PathBuf>,
    /// 0 = derived default (every step up to 100 steps, else every 10th).
    pub snapshot_interval: usize,
    pub checkpoint: bool,
}

impl EmitOptions {
    pub fn none() -> Self {
        EmitOptions::default()
    }

    pub fn to_dir(dir: &Path) -> Self {
        EmitOptions {
            out_dir: Some(dir.to_path_buf()),
            ..EmitOptions::default()
        }
    }

    pub fn interval_for(&self, steps: usize) -> usize {
        if self.snapshot_interval > 0 {
            self.snapshot_interval
        } else if steps <= 100 {
            1
        } else {
            10
        }
    }

    pub fn snapshot_path(&self, step: usize) -> Option<PathBuf> {
        self.out_dir
            .as_ref()
            .map(|d| d.join(format!("snapshot_{step:05}.csv")))
    }
}

/// Shared per-step machinery of the fluid scenarios: train the network on
/// the current particle set, then install the accepted update.
pub(crate) struct FluidDriver {
    pub oracle: FluidOracle,
    pub schema: OutputSchema,
    pub theta: Vec<f64>,
    pub particles: ParticleSet,
    pub history: Vec<LossRow>,
    pub training: TrainingConfig,
    pub last_report: Option<TrainReport>,
}

impl FluidDriver {
    pub fn new(
        layout_sizes: &[usize],
        seed: u64,
        setup: FluidSetup,
        particles: ParticleSet,
        training: TrainingConfig,
    ) -> Result<Self, ScenarioError> {
        let layout = NetworkLayout::new(layout_sizes.to_vec())?;
        if layout.input_width() != 2 {
            return Err(ScenarioError::Config(format!(
                "fluid network needs 2 input neurons, layout has {}",
                layout.input_width()
            )));
        }
        let stages = OutputSchema::fluid_stages_for_width(2, layout.output_width())
            .ok_or_else(|| {
                ScenarioError::Config(format!(
                    "output width {} is not of the form 2(s+1)+s",
                    layout.output_width()
                ))
            })?;
        if stages != setup.tableau.s {
            return Err(ScenarioError::Config(format!(
                "layout implies {stages} stages but the tableau has {}",
                setup.tableau.s
            )));
        }
        let schema = OutputSchema::fluid(2, stages);
        let params = NetworkParams::init(&layout, seed);
        let theta = params.to_flat();
        let n = particles.len();
        Ok(FluidDriver {
            oracle: FluidOracle::new(params, schema, setup, n),
            schema,
            theta,
            particles,
            history: Vec::new(),
            training,
            last_report: None,
        })
    }

    /// Trains on the current particle state. Parameters warm-start from the
    /// previous step.
    pub fn train_step(&mut self, step_idx: usize) -> Result<f64, ScenarioError> {
        let schedule = self.training.schedule(step_idx == 0);
        let oracle = &mut self.oracle;
        oracle.set_particles(&self.particles);
        let handle = oracle.breakdown_handle();
        let history = &mut self.history;
        let theta = &mut self.theta;
        let report = train(oracle, theta, &schedule, |phase, k, loss| {
            let b = handle.get().unwrap_or(LossBreakdown {
                sse_v: loss,
                sse_div: 0.0,
                sse_pbar: 0.0,
                total: loss,
            });
            history.push(LossRow {
                time_step: step_idx,
                phase: match phase {
                    TrainPhase::Adam => Phase::Adam,
                    TrainPhase::Lbfgs => Phase::Lbfgs,
                },
                iteration: k,
                loss,
                sse_v: b.sse_v,
                sse_div: b.sse_div,
                sse_pbar: b.sse_pbar,
            });
        })?;
        let loss = report.final_loss;
        self.last_report = Some(report);
        Ok(loss)
    }

    /// Evaluates the trained stages and advances the particle state.
    pub fn advance(&mut self) {
        self.oracle.params.assign_flat(&self.theta);
        let stages = evaluate_stages(
            &self.oracle.params,
            &self.schema,
            self.oracle.setup.projection,
            self.oracle.setup.input_scale,
            self.oracle.setup.velocity_scale,
            &self.particles,
        );
        advance_step(
            &mut self.particles,
            &self.oracle.setup.tableau,
            self.oracle.setup.dt,
            &stages,
        );
    }
}
