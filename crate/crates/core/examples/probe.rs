// Warm-step recipe probe: no Adam on warm steps, deeper first step.
use neural_particle::scenario::{run_container, ContainerConfig, EmitOptions, TrainingConfig};
use neural_particle::optim::Termination;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let first_lbfgs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(6000);
    let rest_lbfgs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(800);
    let adam_rest: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut cfg = ContainerConfig::sloshing();
    cfg.steps = steps;
    cfg.velocity_scale = std::env::args().nth(5).and_then(|s| s.parse().ok()).unwrap_or(0.02);
    cfg.training = TrainingConfig {
        adam_iters_first: 2000,
        adam_iters: adam_rest,
        lbfgs_max_iter_first: first_lbfgs,
        lbfgs_max_iter: rest_lbfgs,
        ..TrainingConfig::fluid_default()
    };
    let t0 = std::time::Instant::now();
    let r = run_container(&cfg, &EmitOptions::none()).unwrap();
    let _ = Termination::GradientTolerance;
    println!("elapsed {:.1}s adam_rest={} lbfgs={}", t0.elapsed().as_secs_f64(), adam_rest, rest_lbfgs);
    let mut final_loss_by_step: std::collections::BTreeMap<usize, f64> = Default::default();
    let mut iters_by_step: std::collections::BTreeMap<usize, usize> = Default::default();
    for row in &r.history {
        final_loss_by_step.insert(row.time_step, row.loss);
        *iters_by_step.entry(row.time_step).or_insert(0) += 1;
    }
    for (i, row) in r.series.iter().enumerate() {
        println!("t={:4.1} amp={:+.5} Ek={:.3e} Etot={:.5} loss={:.2e} iters={}", row.t, row.amplitude, row.e_kinetic, row.e_total, final_loss_by_step.get(&i).unwrap_or(&f64::NAN), iters_by_step.get(&i).unwrap_or(&0));
    }
}
