use std::cell::Cell;
use std::rc::Rc;

use ndarray::{s, Array2};

use crate::autodiff::{BatchWorkspace, Dual2, Program, Scalar, Tape, Var};
use crate::irk::ButcherTableau;
use crate::network::{NetWorkspace, NetworkParams, OutputSchema};
use crate::optim::{EvalError, Objective};

use super::{
    fluid_particle_terms, ContactSpec, FluidProperties, LossBreakdown, LossWeights,
    ParticleInput, ParticleSet, Projection, StepContext, StepError, Tag,
};

/// Fixed leaf layout of the per-particle residual program: position (2),
/// previous velocity (2), surface weight (1), then the network outputs and
/// their two spatial tangent blocks.
const LEAF_HEADER: usize = 5;

/// The per-particle residual computation recorded once as a tape program.
/// Structure is identical for every particle; particle data enters through
/// the leaves.
pub struct FluidProgram {
    program: Program,
    output: u32,
    monitors: Vec<u32>,
    n_out: usize,
}

impl FluidProgram {
    pub fn record(ctx: &StepContext<'_>, schema: &OutputSchema) -> Self {
        let n_out = schema.output_width();
        let tape = Tape::new();
        let px = tape.leaf(0.0);
        let py = tape.leaf(0.0);
        let v_n = [tape.leaf(0.0), tape.leaf(0.0)];
        let surface_weight = tape.leaf(0.0);
        let y: Vec<Var<'_>> = (0..n_out).map(|_| tape.leaf(0.0)).collect();
        let jx: Vec<Var<'_>> = (0..n_out).map(|_| tape.leaf(0.0)).collect();
        let jy: Vec<Var<'_>> = (0..n_out).map(|_| tape.leaf(0.0)).collect();

        let x = [Dual2::seeded(px, 0), Dual2::seeded(py, 1)];
        let outs: Vec<Dual2<Var<'_>>> = (0..n_out)
            .map(|k| Dual2::new(y[k], [jx[k], jy[k]]))
            .collect();
        let inp = ParticleInput {
            x,
            v_n,
            surface_weight,
        };
        let terms = fluid_particle_terms(ctx, schema, &inp, &outs);

        let mut monitors = vec![terms.sse_v.id(), terms.sse_div.id(), terms.sse_pbar.id()];
        monitors.extend(terms.dets.iter().map(|d| d.id()));
        FluidProgram {
            output: terms.total.id(),
            program: Program::from_tape(&tape),
            monitors,
            n_out,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.program.n_nodes()
    }

    pub fn n_leaves(&self) -> usize {
        LEAF_HEADER + 3 * self.n_out
    }
}

/// Physics configuration of one scenario run.
#[derive(Debug, Clone)]
pub struct FluidSetup {
    pub tableau: ButcherTableau,
    pub dt: f64,
    pub props: FluidProperties,
    pub projection: Projection,
    pub contact: ContactSpec,
    pub weights: LossWeights,
    /// Physical coordinates are divided by this before entering the network.
    pub input_scale: f64,
    /// Raw velocity outputs are multiplied by this.
    pub velocity_scale: f64,
}

impl FluidSetup {
    pub fn context(&self) -> StepContext<'_> {
        StepContext {
            tableau: &self.tableau,
            dt: self.dt,
            props: self.props,
            projection: self.projection,
            contact: &self.contact,
            weights: self.weights,
            velocity_scale: self.velocity_scale,
        }
    }
}

/// Loss-and-gradient oracle for one particle set: batched network evaluation
/// feeding the replayed residual program, with the leaf adjoints pulled back
/// through the network.
pub struct FluidOracle {
    pub params: NetworkParams,
    pub setup: FluidSetup,
    schema: OutputSchema,
    program: FluidProgram,
    net_ws: NetWorkspace,
    leaf_values: Array2<f64>,
    monitor_out: Array2<f64>,
    leaf_adj: Array2<f64>,
    batch_ws: BatchWorkspace,
    x_mat: Array2<f64>,
    n: usize,
    breakdown: Rc<Cell<Option<LossBreakdown>>>,
}

impl FluidOracle {
    pub fn new(
        params: NetworkParams,
        schema: OutputSchema,
        setup: FluidSetup,
        n_particles: usize,
    ) -> Self {
        let program = FluidProgram::record(&setup.context(), &schema);
        let n_out = schema.output_width();
        let layout = params.layout();
        FluidOracle {
            net_ws: NetWorkspace::new(&layout, n_particles, setup.input_scale),
            leaf_values: Array2::zeros((LEAF_HEADER + 3 * n_out, n_particles)),
            monitor_out: Array2::zeros((program.monitors.len(), n_particles)),
            leaf_adj: Array2::zeros((LEAF_HEADER + 3 * n_out, n_particles)),
            batch_ws: BatchWorkspace::new(),
            x_mat: Array2::zeros((2, n_particles)),
            n: n_particles,
            params,
            setup,
            schema,
            program,
            breakdown: Rc::new(Cell::new(None)),
        }
    }

    /// Shared handle to the breakdown of the most recent evaluation; lets a
    /// logging callback read components while the optimizer owns the oracle.
    pub fn breakdown_handle(&self) -> Rc<Cell<Option<LossBreakdown>>> {
        Rc::clone(&self.breakdown)
    }

    pub fn last_breakdown(&self) -> Option<LossBreakdown> {
        self.breakdown.get()
    }

    /// Loads particle state (positions, previous velocities, surface
    /// weights) into the leaf bindings. Call once per time step.
    pub fn set_particles(&mut self, particles: &ParticleSet) {
        assert_eq!(particles.len(), self.n);
        for i in 0..self.n {
            self.x_mat[[0, i]] = particles.positions[[i, 0]];
            self.x_mat[[1, i]] = particles.positions[[i, 1]];
            self.leaf_values[[0, i]] = particles.positions[[i, 0]];
            self.leaf_values[[1, i]] = particles.positions[[i, 1]];
            self.leaf_values[[2, i]] = particles.velocities[[i, 0]];
            self.leaf_values[[3, i]] = particles.velocities[[i, 1]];
            self.leaf_values[[4, i]] = if particles.tags[i] == Tag::FreeSurface {
                1.0
            } else {
                0.0
            };
        }
    }

    /// Swaps the boundary projection (dam break refreshes extents every
    /// step) and re-records the residual program.
    pub fn set_projection(&mut self, projection: Projection) {
        if self.setup.projection != projection {
            self.setup.projection = projection;
            self.program = FluidProgram::record(&self.setup.context(), &self.schema);
        }
    }

    /// Loss breakdown and parameter gradient at `theta`.
    pub fn eval_detailed(
        &mut self,
        theta: &[f64],
        grad: &mut [f64],
    ) -> Result<LossBreakdown, StepError> {
        let n_out = self.schema.output_width();
        self.params.assign_flat(theta);
        self.net_ws.forward(&self.params, self.x_mat.view());
        self.leaf_values
            .slice_mut(s![LEAF_HEADER..LEAF_HEADER + n_out, ..])
            .assign(&self.net_ws.outputs());
        self.leaf_values
            .slice_mut(s![LEAF_HEADER + n_out..LEAF_HEADER + 2 * n_out, ..])
            .assign(&self.net_ws.output_tangent(0));
        self.leaf_values
            .slice_mut(s![LEAF_HEADER + 2 * n_out..LEAF_HEADER + 3 * n_out, ..])
            .assign(&self.net_ws.output_tangent(1));

        self.program.program.run_batch(
            self.leaf_values.view(),
            self.program.output,
            &self.program.monitors,
            &mut self.batch_ws,
            &mut self.monitor_out,
            &mut self.leaf_adj,
        )?;

        // Stage determinants must stay positive for an acceptable state.
        let n_dets = self.program.monitors.len() - 3;
        let mut min_det = f64::INFINITY;
        let mut min_stage = 0;
        for stage in 0..n_dets {
            for &v in self.monitor_out.row(3 + stage) {
                if v < min_det {
                    min_det = v;
                    min_stage = stage;
                }
            }
        }
        if min_det <= 0.0 {
            return Err(StepError::StepRejected {
                stage: min_stage,
                min_det,
            });
        }

        let sum_row = |r: usize| -> f64 { self.monitor_out.row(r).iter().sum() };
        let breakdown = LossBreakdown::new(sum_row(0), sum_row(1), sum_row(2), &self.setup.weights);

        grad.fill(0.0);
        self.net_ws.backward(
            &self.params,
            self.leaf_adj.slice(s![LEAF_HEADER..LEAF_HEADER + n_out, ..]),
            &[
                self.leaf_adj
                    .slice(s![LEAF_HEADER + n_out..LEAF_HEADER + 2 * n_out, ..]),
                self.leaf_adj
                    .slice(s![LEAF_HEADER + 2 * n_out..LEAF_HEADER + 3 * n_out, ..]),
            ],
            grad,
        );
        self.breakdown.set(Some(breakdown));
        Ok(breakdown)
    }
}

impl Objective for FluidOracle {
    fn eval(&mut self, theta: &[f64], grad: &mut [f64]) -> Result<f64, EvalError> {
        self.eval_detailed(theta, grad)
            .map(|b| b.total)
            .map_err(|e| EvalError(e.to_string()))
    }
}

/// Reference route: the entire computation (network forward included) on the
/// scalar tape via nested duals. Slow but makes no use of the batched
/// kernels, so it independently checks them.
pub fn tape_reference_loss(
    params: &NetworkParams,
    setup: &FluidSetup,
    schema: &OutputSchema,
    particles: &ParticleSet,
) -> Result<(LossBreakdown, Vec<f64>), StepError> {
    let ctx = setup.context();
    let tape = Tape::new();
    let mut leaves = Vec::with_capacity(params.param_count());
    let lifted = params.lift(|w| {
        let leaf = tape.leaf(w);
        leaves.push(leaf);
        Dual2::lift(leaf)
    });

    let mut acc: Option<[Var<'_>; 3]> = None;
    for i in 0..particles.len() {
        let (px, py) = (particles.positions[[i, 0]], particles.positions[[i, 1]]);
        let x = [
            Dual2::seeded(tape.constant(px), 0),
            Dual2::seeded(tape.constant(py), 1),
        ];
        let x_net = [
            x[0].scale(1.0 / setup.input_scale),
            x[1].scale(1.0 / setup.input_scale),
        ];
        let outs = lifted.forward(&x_net);
        let inp = ParticleInput {
            x,
            v_n: [
                tape.constant(particles.velocities[[i, 0]]),
                tape.constant(particles.velocities[[i, 1]]),
            ],
            surface_weight: tape.constant(if particles.tags[i] == Tag::FreeSurface {
                1.0
            } else {
                0.0
            }),
        };
        let terms = fluid_particle_terms(&ctx, schema, &inp, &outs);
        for (stage, det) in terms.dets.iter().enumerate() {
            let d = det.value();
            if d <= 0.0 {
                return Err(StepError::StepRejected {
                    stage,
                    min_det: d,
                });
            }
        }
        acc = Some(match acc {
            None => [terms.sse_v, terms.sse_div, terms.sse_pbar],
            Some([a, b, c]) => [a + terms.sse_v, b + terms.sse_div, c + terms.sse_pbar],
        });
    }
    let [sv, sd, sp] = acc.expect("empty particle set");
    let total = sv
        .scale(setup.weights.velocity)
        .mul_add_c(sd, setup.weights.divergence)
        .mul_add_c(sp, setup.weights.pressure_bc);
    let breakdown = LossBreakdown::new(sv.value(), sd.value(), sp.value(), &setup.weights);
    let grad_sweep = tape.gradient(total)?;
    let grad = leaves.iter().map(|&l| grad_sweep.wrt(l)).collect();
    Ok((breakdown, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irk::gauss_legendre;
    use crate::network::NetworkLayout;
    use crate::physics::WallPlane;
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_setup(s: usize, dt: f64, contact: bool) -> FluidSetup {
        FluidSetup {
            tableau: gauss_legendre(s).unwrap(),
            dt,
            props: FluidProperties {
                rho: 1.0,
                body_accel: [0.0, -10.0],
            },
            projection: Projection::Container { w: 1.0, h: 1.0 },
            contact: if contact {
                ContactSpec {
                    penalty: 1e4,
                    walls: vec![
                        WallPlane {
                            point: [0.0, 0.0],
                            outward: [-1.0, 0.0],
                        },
                        WallPlane {
                            point: [0.0, 0.0],
                            outward: [0.0, -1.0],
                        },
                        WallPlane {
                            point: [1.0, 0.0],
                            outward: [1.0, 0.0],
                        },
                    ],
                }
            } else {
                ContactSpec::disabled()
            },
            weights: LossWeights::default(),
            input_scale: 1.0,
            velocity_scale: 1.0,
        }
    }

    fn toy_particles(n: usize, seed: u64) -> ParticleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pos = Array2::zeros((n, 2));
        let mut vel = Array2::zeros((n, 2));
        let mut tags = Vec::new();
        for i in 0..n {
            pos[[i, 0]] = rng.random_range(0.05..0.95);
            pos[[i, 1]] = rng.random_range(0.05..0.95);
            vel[[i, 0]] = rng.random_range(-0.1..0.1);
            vel[[i, 1]] = rng.random_range(-0.1..0.1);
            tags.push(if i % 3 == 0 {
                Tag::FreeSurface
            } else {
                Tag::Interior
            });
        }
        let mut p = ParticleSet::new(pos, vel, tags);
        p.pressures = Array1::zeros(n);
        p
    }

    #[test]
    fn batched_route_matches_nested_tape_route() {
        let s = 3;
        let schema = OutputSchema::fluid(2, s);
        let layout = NetworkLayout::new(vec![2, 6, schema.output_width()]).unwrap();
        let params = NetworkParams::init(&layout, 21);
        let setup = toy_setup(s, 0.05, true);
        let particles = toy_particles(7, 4);

        let (b_ref, g_ref) =
            tape_reference_loss(&params, &setup, &schema, &particles).unwrap();

        let mut oracle = FluidOracle::new(params.clone(), schema, setup, particles.len());
        oracle.set_particles(&particles);
        let mut grad = vec![0.0; params.param_count()];
        let b = oracle
            .eval_detailed(&params.to_flat(), &mut grad)
            .unwrap();

        assert!((b.total - b_ref.total).abs() <= 1e-12 * b_ref.total.abs().max(1.0));
        assert!((b.sse_v - b_ref.sse_v).abs() <= 1e-12 * b_ref.sse_v.abs().max(1.0));
        assert!((b.sse_div - b_ref.sse_div).abs() <= 1e-12 * b_ref.sse_div.abs().max(1.0));
        assert!((b.sse_pbar - b_ref.sse_pbar).abs() <= 1e-12 * b_ref.sse_pbar.abs().max(1.0));
        let gnorm = g_ref.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (i, (a, r)) in grad.iter().zip(&g_ref).enumerate() {
            assert!(
                (a - r).abs() <= 1e-10 * gnorm.max(1.0),
                "grad[{i}]: batched {a} vs tape {r}"
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // Differentiation through the matrix inverse and the projection
        // product rule, against central differences on a 10-particle case.
        let s = 2;
        let schema = OutputSchema::fluid(2, s);
        let layout = NetworkLayout::new(vec![2, 5, schema.output_width()]).unwrap();
        let params = NetworkParams::init(&layout, 77);
        let setup = toy_setup(s, 0.1, false);
        let particles = toy_particles(10, 9);

        let mut oracle = FluidOracle::new(params.clone(), schema, setup, particles.len());
        oracle.set_particles(&particles);
        let theta = params.to_flat();
        let mut grad = vec![0.0; theta.len()];
        oracle.eval_detailed(&theta, &mut grad).unwrap();

        let mut scratch = vec![0.0; theta.len()];
        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..15 {
            let k = rng.random_range(0..theta.len());
            let mut tp = theta.clone();
            tp[k] += h;
            let fp = oracle.eval_detailed(&tp, &mut scratch).unwrap().total;
            tp[k] = theta[k] - h;
            let fm = oracle.eval_detailed(&tp, &mut scratch).unwrap().total;
            let fd = (fp - fm) / (2.0 * h);
            let denom = fd.abs().max(grad[k].abs()).max(1e-8);
            assert!(
                ((grad[k] - fd) / denom).abs() < 1e-5,
                "param {k}: autodiff {} vs fd {fd}",
                grad[k]
            );
        }
    }

    #[test]
    fn loss_is_additive_over_duplicated_particles() {
        let s = 2;
        let schema = OutputSchema::fluid(2, s);
        let layout = NetworkLayout::new(vec![2, 4, schema.output_width()]).unwrap();
        let params = NetworkParams::init(&layout, 5);
        let setup = toy_setup(s, 0.1, false);
        let particles = toy_particles(6, 2);

        let mut doubled_pos = Array2::zeros((12, 2));
        let mut doubled_vel = Array2::zeros((12, 2));
        let mut doubled_tags = Vec::new();
        for rep in 0..2 {
            for i in 0..6 {
                for k in 0..2 {
                    doubled_pos[[rep * 6 + i, k]] = particles.positions[[i, k]];
                    doubled_vel[[rep * 6 + i, k]] = particles.velocities[[i, k]];
                }
            }
            doubled_tags.extend(particles.tags.iter().copied());
        }
        let doubled = ParticleSet::new(doubled_pos, doubled_vel, doubled_tags);

        let mut grad = vec![0.0; params.param_count()];
        let mut o1 = FluidOracle::new(params.clone(), schema, setup.clone(), 6);
        o1.set_particles(&particles);
        let b1 = o1.eval_detailed(&params.to_flat(), &mut grad).unwrap();
        let mut o2 = FluidOracle::new(params.clone(), schema, setup, 12);
        o2.set_particles(&doubled);
        let b2 = o2.eval_detailed(&params.to_flat(), &mut grad).unwrap();

        assert!((b2.sse_v - 2.0 * b1.sse_v).abs() < 1e-12 * b1.sse_v.max(1.0));
        assert!((b2.sse_div - 2.0 * b1.sse_div).abs() < 1e-12 * b1.sse_div.max(1.0));
        assert!((b2.sse_pbar - 2.0 * b1.sse_pbar).abs() < 1e-12 * b1.sse_pbar.max(1.0));
    }
}
