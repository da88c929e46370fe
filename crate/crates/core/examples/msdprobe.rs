use neural_particle::scenario::{run_msd, EmitOptions, MsdConfig};

fn main() {
    for (dt, steps) in [(std::f64::consts::PI, 6usize), (2.0 * std::f64::consts::PI, 3)] {
        let cfg = MsdConfig { dt, steps, ..MsdConfig::default() };
        let t0 = std::time::Instant::now();
        let r = run_msd(&cfg, &EmitOptions::none()).unwrap();
        println!("dt={dt:.3}: max_err={:.5} (tol 0.02), final loss {:.2e}, {:.0}s", r.max_error, r.final_loss, t0.elapsed().as_secs_f64());
        for i in 0..r.times.len() {
            println!("  t={:6.3} q={:+.6} exact={:+.6}", r.times[i], r.q[i], r.exact[i]);
        }
    }
}
