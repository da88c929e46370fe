//! Timing probe for the production loss/gradient path. Ignored by default;
//! run with `cargo test --test perf -- --ignored --nocapture`.

use ndarray::Array2;
use neural_particle::irk::gauss_legendre;
use neural_particle::network::{NetworkLayout, NetworkParams, OutputSchema};
use neural_particle::physics::{
    ContactSpec, FluidOracle, FluidProperties, FluidSetup, LossWeights, ParticleSet, Projection,
    Tag, WallPlane,
};

#[test]
#[ignore]
fn loss_grad_timing_at_production_scale() {
    let s = 20;
    let schema = OutputSchema::fluid(2, s);
    let layout = NetworkLayout::new(vec![2, 60, 60, schema.output_width()]).unwrap();
    let params = NetworkParams::init(&layout, 1);
    let n = 900;

    let side = (n as f64).sqrt() as usize;
    let mut pos = Array2::zeros((n, 2));
    let mut tags = vec![Tag::Interior; n];
    for i in 0..n {
        let (r, c) = (i / side, i % side);
        pos[[i, 0]] = c as f64 / (side - 1) as f64;
        pos[[i, 1]] = r as f64 / (side - 1) as f64;
        if r == side - 1 {
            tags[i] = Tag::FreeSurface;
        }
    }
    let particles = ParticleSet::new(pos, Array2::zeros((n, 2)), tags);

    let setup = FluidSetup {
        tableau: gauss_legendre(s).unwrap(),
        dt: 0.1,
        props: FluidProperties {
            rho: 1.0,
            body_accel: [0.0, -1.0],
        },
        projection: Projection::Container { w: 1.0, h: 1.0 },
        contact: ContactSpec {
            penalty: 1e7,
            walls: vec![
                WallPlane {
                    point: [0.0, 0.0],
                    outward: [-1.0, 0.0],
                },
                WallPlane {
                    point: [1.0, 0.0],
                    outward: [1.0, 0.0],
                },
                WallPlane {
                    point: [0.0, 0.0],
                    outward: [0.0, -1.0],
                },
            ],
        },
        weights: LossWeights::default(),
        input_scale: 1.0,
        velocity_scale: 1.0,
    };
    let mut oracle = FluidOracle::new(params.clone(), schema, setup, n);
    oracle.set_particles(&particles);

    let theta = params.to_flat();
    let mut grad = vec![0.0; theta.len()];
    // Warm up.
    oracle.eval_detailed(&theta, &mut grad).unwrap();

    let reps = 20;
    let t0 = std::time::Instant::now();
    for _ in 0..reps {
        oracle.eval_detailed(&theta, &mut grad).unwrap();
    }
    let per_eval = t0.elapsed().as_secs_f64() / reps as f64;
    println!("program nodes: (n/a) | per eval: {:.1} ms", per_eval * 1e3);
    assert!(per_eval < 1.0, "loss+grad evaluation unexpectedly slow");
}
