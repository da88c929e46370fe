//! Per-time-step training: Adam warm-up followed by L-BFGS refinement until
//! convergence.

mod adam;
mod lbfgs;

pub use adam::AdamState;
pub use lbfgs::{lbfgs_minimize, LbfgsOptions, LbfgsOutcome, Termination};

use thiserror::Error;

/// A differentiable objective. `eval` writes the gradient for `theta` into
/// `grad` and returns the loss.
pub trait Objective {
    fn eval(&mut self, theta: &[f64], grad: &mut [f64]) -> Result<f64, EvalError>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64, EvalError>,
{
    fn eval(&mut self, theta: &[f64], grad: &mut [f64]) -> Result<f64, EvalError> {
        self(theta, grad)
    }
}

/// An objective evaluation that could not produce a finite loss/gradient at
/// the requested point (e.g. an inverted deformation gradient on a trial
/// step). Line searches back off; Adam aborts.
#[derive(Debug, Error)]
#[error("objective evaluation failed: {0}")]
pub struct EvalError(pub String);

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("non-finite gradient at iteration {0}")]
    NonFiniteGradient(usize),
    #[error("objective failed outside a recoverable line search: {0}")]
    Objective(#[from] EvalError),
}

/// Training schedule: Adam iterations and learning rate, then L-BFGS.
#[derive(Debug, Clone, Copy)]
pub struct TrainSchedule {
    pub adam_iters: usize,
    pub adam_lr: f64,
    pub lbfgs: LbfgsOptions,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            adam_iters: 100,
            adam_lr: 1e-3,
            lbfgs: LbfgsOptions::default(),
        }
    }
}

/// Optimizer phase reported to the iteration callback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainPhase {
    Adam,
    Lbfgs,
}

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub final_loss: f64,
    pub lbfgs_iterations: usize,
    pub termination: Termination,
}

/// Runs the schedule on `theta` in place, invoking `on_iter(phase, k, loss)`
/// after every accepted iterate.
pub fn train<O: Objective>(
    objective: &mut O,
    theta: &mut [f64],
    schedule: &TrainSchedule,
    mut on_iter: impl FnMut(TrainPhase, usize, f64),
) -> Result<TrainReport, OptimError> {
    let n = theta.len();
    let mut grad = vec![0.0; n];

    if schedule.adam_iters > 0 {
        let mut adam = AdamState::new(n, schedule.adam_lr);
        for k in 0..schedule.adam_iters {
            let loss = objective.eval(theta, &mut grad)?;
            if !grad.iter().all(|g| g.is_finite()) {
                return Err(OptimError::NonFiniteGradient(k));
            }
            adam.step(theta, &grad);
            on_iter(TrainPhase::Adam, k, loss);
        }
    }

    let outcome = lbfgs_minimize(objective, theta, &schedule.lbfgs, |k, loss| {
        on_iter(TrainPhase::Lbfgs, k, loss)
    })?;
    Ok(TrainReport {
        final_loss: outcome.final_loss,
        lbfgs_iterations: outcome.iterations,
        termination: outcome.termination,
    })
}
