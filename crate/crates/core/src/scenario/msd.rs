use crate::autodiff::Tape;
use crate::irk::{gauss_legendre, ButcherTableau};
use crate::network::{NetworkLayout, NetworkParams, OutputSchema};
use crate::optim::{train, EvalError, Objective, TrainPhase};
use crate::output::{fmt_f64, write_atomic, write_loss_history, LossRow, Phase};

use super::{EmitOptions, ScenarioError, TrainingConfig};

/// One-dimensional mass-spring-damper in generalized coordinates.
#[derive(Debug, Clone, Copy)]
pub struct MsdProblem {
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
    /// Initial amplitude q(0).
    pub q0: f64,
}

impl MsdProblem {
    pub fn omega0(&self) -> f64 {
        (self.stiffness / self.mass).sqrt()
    }

    /// Attenuation D = d / (2·sqrt(k·m)); zero for the undamped/unsprung
    /// free case.
    pub fn attenuation(&self) -> f64 {
        let km = self.stiffness * self.mass;
        if km == 0.0 && self.damping == 0.0 {
            0.0
        } else {
            self.damping / (2.0 * km.sqrt())
        }
    }

    fn check(&self) -> Result<(f64, f64), ScenarioError> {
        let d = self.attenuation();
        if !(d.is_finite() && d < 1.0) {
            return Err(ScenarioError::OverCriticalDamping(d));
        }
        Ok((self.omega0(), d))
    }

    /// Under-critically damped closed form:
    /// `q(t) = q0·exp(-D·w0·t)·cos(w0·sqrt(1-D²)·t)`.
    pub fn analytic(&self, t: f64) -> Result<f64, ScenarioError> {
        let (w0, d) = self.check()?;
        let wd = w0 * (1.0 - d * d).sqrt();
        Ok(self.q0 * (-d * w0 * t).exp() * (wd * t).cos())
    }

    /// Time derivative of the closed form; the IRK run starts from this so
    /// both trajectories solve the same initial value problem.
    pub fn analytic_velocity(&self, t: f64) -> Result<f64, ScenarioError> {
        let (w0, d) = self.check()?;
        let wd = w0 * (1.0 - d * d).sqrt();
        let e = (-d * w0 * t).exp();
        Ok(self.q0 * e * (-d * w0 * (wd * t).cos() - wd * (wd * t).sin()))
    }
}

#[derive(Debug, Clone)]
pub struct MsdConfig {
    pub problem: MsdProblem,
    pub dt: f64,
    pub steps: usize,
    /// Network layout; the output width fixes the stage count (s+1 outputs).
    pub layout: Vec<usize>,
    pub seed: u64,
    pub training: TrainingConfig,
}

impl Default for MsdConfig {
    fn default() -> Self {
        MsdConfig {
            problem: MsdProblem {
                mass: 1.0,
                stiffness: 1.0,
                damping: 0.1,
                q0: 1.0,
            },
            dt: std::f64::consts::PI,
            steps: 6,
            layout: vec![1, 20, 20, 9],
            seed: 1,
            training: TrainingConfig::msd_default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MsdResult {
    pub times: Vec<f64>,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub exact: Vec<f64>,
    pub max_error: f64,
    pub history: Vec<LossRow>,
    pub final_loss: f64,
}

struct MsdOracle {
    params: NetworkParams,
    tableau: ButcherTableau,
    dt: f64,
    k_over_m: f64,
    d_over_m: f64,
    q_n: f64,
    qdot_n: f64,
}

impl Objective for MsdOracle {
    fn eval(&mut self, theta: &[f64], grad: &mut [f64]) -> Result<f64, EvalError> {
        self.params.assign_flat(theta);
        let tape = Tape::new();
        let mut leaves = Vec::with_capacity(theta.len());
        let lifted = self.params.lift(|w| {
            let leaf = tape.leaf(w);
            leaves.push(leaf);
            leaf
        });
        let q = tape.constant(self.q_n);
        let outs = lifted.forward(&[q]);
        let ctx = crate::physics::OdeContext {
            tableau: &self.tableau,
            dt: self.dt,
        };
        let (km, dm) = (self.k_over_m, self.d_over_m);
        let sse = crate::physics::ode_particle_terms(&ctx, q, self.qdot_n, &outs, |qq, qd| {
            use crate::autodiff::Scalar;
            qq.scale(-km) + qd.scale(-dm)
        });
        let sweep = tape.gradient(sse).map_err(|e| EvalError(e.to_string()))?;
        for (g, leaf) in grad.iter_mut().zip(&leaves) {
            *g = sweep.wrt(*leaf);
        }
        Ok(tape.value(sse))
    }
}

/// Integrates the oscillator with the network-IRK scheme, one training
/// problem per time step, and reports the error against the closed form.
pub fn run_msd(cfg: &MsdConfig, emit: &EmitOptions) -> Result<MsdResult, ScenarioError> {
    let layout = NetworkLayout::new(cfg.layout.to_vec())?;
    if layout.input_width() != 1 {
        return Err(ScenarioError::Config(
            "the ODE network takes one input neuron".into(),
        ));
    }
    let stages = layout.output_width() - 1;
    if stages == 0 {
        return Err(ScenarioError::Config("need at least one IRK stage".into()));
    }
    let schema = OutputSchema::ode(stages);
    debug_assert_eq!(schema.output_width(), layout.output_width());
    let tableau = gauss_legendre(stages)?;
    let params = NetworkParams::init(&layout, cfg.seed);

    let q0 = cfg.problem.analytic(0.0)?;
    let v0 = cfg.problem.analytic_velocity(0.0)?;
    let mut oracle = MsdOracle {
        params,
        tableau,
        dt: cfg.dt,
        k_over_m: cfg.problem.stiffness / cfg.problem.mass,
        d_over_m: cfg.problem.damping / cfg.problem.mass,
        q_n: q0,
        qdot_n: v0,
    };
    let mut theta = oracle.params.to_flat();
    let mut grad_hist = Vec::new();

    let mut times = vec![0.0];
    let mut q_series = vec![q0];
    let mut qdot_series = vec![v0];
    let mut final_loss = 0.0;

    for step in 0..cfg.steps {
        let schedule = cfg.training.schedule(step == 0);
        let hist = &mut grad_hist;
        let report = train(&mut oracle, &mut theta, &schedule, |phase, k, loss| {
            hist.push(LossRow {
                time_step: step,
                phase: match phase {
                    TrainPhase::Adam => Phase::Adam,
                    TrainPhase::Lbfgs => Phase::Lbfgs,
                },
                iteration: k,
                loss,
                sse_v: loss,
                sse_div: 0.0,
                sse_pbar: 0.0,
            });
        })?;
        final_loss = report.final_loss;

        // Accepted update: position from the b-weighted stage integral,
        // velocity from the final output neuron.
        oracle.params.assign_flat(&theta);
        let outs = oracle.params.forward(&[oracle.q_n])?;
        let v_stages: Vec<[f64; 1]> = (0..stages).map(|i| [outs[i]]).collect();
        let (_, q_next) = oracle.tableau.position_update(cfg.dt, [oracle.q_n], &v_stages);
        oracle.q_n = q_next[0];
        oracle.qdot_n = outs[stages];
        times.push(cfg.dt * (step + 1) as f64);
        q_series.push(oracle.q_n);
        qdot_series.push(oracle.qdot_n);
    }

    let mut exact = Vec::with_capacity(times.len());
    let mut max_error = 0.0f64;
    for (&t, &q) in times.iter().zip(&q_series) {
        let e = cfg.problem.analytic(t)?;
        exact.push(e);
        max_error = max_error.max((q - e).abs());
    }

    if let Some(dir) = &emit.out_dir {
        let mut csv = String::from("t,q,qdot,q_exact\n");
        for i in 0..times.len() {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(times[i]),
                fmt_f64(q_series[i]),
                fmt_f64(qdot_series[i]),
                fmt_f64(exact[i]),
            ));
        }
        write_atomic(&dir.join("trajectory.csv"), csv.as_bytes())?;
        write_loss_history(&dir.join("loss_history.csv"), &grad_hist)?;
        if emit.checkpoint {
            crate::network::save_checkpoint(&dir.join("params.txt"), &oracle.params)
                .map_err(|e| ScenarioError::Config(e.to_string()))?;
        }
    }

    Ok(MsdResult {
        times,
        q: q_series,
        qdot: qdot_series,
        exact,
        max_error,
        history: grad_hist,
        final_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_examples() {
        let p = MsdProblem {
            mass: 1.0,
            stiffness: 1.0,
            damping: 0.1,
            q0: 1.0,
        };
        assert_eq!(p.analytic(0.0).unwrap(), 1.0);

        let undamped = MsdProblem {
            damping: 0.0,
            ..p
        };
        let t = 2.0 * std::f64::consts::PI / undamped.omega0();
        assert!((undamped.analytic(t).unwrap() - 1.0).abs() < 1e-12);

        // m=1, k=1, d=0.1 at t=10: exp(-0.5)·cos(sqrt(0.9975)·10).
        let expected = (-0.5f64).exp() * ((0.9975f64).sqrt() * 10.0).cos();
        assert!((p.analytic(10.0).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn over_critical_damping_rejected() {
        let p = MsdProblem {
            mass: 1.0,
            stiffness: 1.0,
            damping: 2.5,
            q0: 1.0,
        };
        assert!(matches!(
            p.analytic(1.0),
            Err(ScenarioError::OverCriticalDamping(_))
        ));
    }

    #[test]
    fn zero_dynamics_keeps_q_constant() {
        let cfg = MsdConfig {
            problem: MsdProblem {
                mass: 1.0,
                stiffness: 0.0,
                damping: 0.0,
                q0: 1.0,
            },
            dt: 0.5,
            steps: 3,
            layout: vec![1, 8, 5],
            seed: 4,
            training: TrainingConfig {
                adam_iters_first: 50,
                adam_iters: 20,
                ..TrainingConfig::msd_default()
            },
        };
        let r = run_msd(&cfg, &EmitOptions::none()).unwrap();
        for q in &r.q {
            assert!((q - 1.0).abs() < 1e-4, "q drifted to {q}");
        }
    }
}
