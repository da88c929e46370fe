use crate::autodiff::{Dual2, Scalar};
use crate::irk::ButcherTableau;
use crate::network::OutputSchema;

use super::{
    contact_force, ContactSpec, FluidProperties, LossWeights, Projection, StepError,
};

/// Everything constant across particles within one time step.
pub struct StepContext<'a> {
    pub tableau: &'a ButcherTableau,
    pub dt: f64,
    pub props: FluidProperties,
    pub projection: Projection,
    pub contact: &'a ContactSpec,
    pub weights: LossWeights,
    /// Physical scale of the velocity outputs: the raw network neurons are
    /// multiplied by this, keeping them O(1) for O(scale) flows.
    pub velocity_scale: f64,
}

/// Per-particle inputs. The position components are duals seeded with the
/// identity, so every downstream tangent is a spatial derivative at this
/// particle.
pub struct ParticleInput<V> {
    pub x: [Dual2<V>; 2],
    pub v_n: [V; 2],
    /// 1 for free-surface particles (pressure BC applies), else 0.
    pub surface_weight: V,
}

/// Residual contributions of one particle, plus the stage determinants of
/// the incremental deformation gradient for step-acceptance monitoring
/// (stage dets first, then the end-of-step det).
pub struct ParticleTerms<V> {
    pub sse_v: V,
    pub sse_div: V,
    pub sse_pbar: V,
    pub total: V,
    pub dets: Vec<V>,
}

/// Incremental deformation gradients from the stage rates:
/// `dF^j = 1 + dt·sum_i a[j][i]·dFdot^i` and the end-of-step gradient with
/// the b-weights. `fdot[i][r][c]` is d(v^i_r)/d(x_n_c).
pub fn incremental_gradients<V: Scalar>(
    tab: &ButcherTableau,
    dt: f64,
    fdot: &[[[V; 2]; 2]],
) -> (Vec<[[V; 2]; 2]>, [[V; 2]; 2]) {
    let one = fdot[0][0][0].const_like(1.0);
    let zero = fdot[0][0][0].const_like(0.0);
    let identity = [[one, zero], [zero, one]];

    let mut stages = Vec::with_capacity(tab.s);
    for j in 0..tab.s {
        let mut f = identity;
        for (i, rate) in fdot.iter().enumerate() {
            let c = dt * tab.a[j][i];
            for r in 0..2 {
                for col in 0..2 {
                    f[r][col] = f[r][col].mul_add_c(rate[r][col], c);
                }
            }
        }
        stages.push(f);
    }
    let mut f_next = identity;
    for (j, rate) in fdot.iter().enumerate() {
        let c = dt * tab.b[j];
        for r in 0..2 {
            for col in 0..2 {
                f_next[r][col] = f_next[r][col].mul_add_c(rate[r][col], c);
            }
        }
    }
    (stages, f_next)
}

fn det2<V: Scalar>(f: &[[V; 2]; 2]) -> V {
    f[0][0] * f[1][1] - f[0][1] * f[1][0]
}

/// Velocity divergence in the current configuration:
/// `div v = tr(dFdot · dF^{-1})`, with gradients flowing through the
/// inverse via the adjugate/determinant form.
pub fn divergence<V: Scalar>(fdot: &[[V; 2]; 2], f: &[[V; 2]; 2]) -> V {
    let det = det2(f);
    let tr =
        fdot[0][0] * f[1][1] - fdot[0][1] * f[1][0] - fdot[1][0] * f[0][1] + fdot[1][1] * f[0][0];
    tr / det
}

/// Plain-value divergence that rejects a singular deformation gradient.
pub fn divergence_checked(fdot: [[f64; 2]; 2], f: [[f64; 2]; 2]) -> Result<f64, StepError> {
    let det = det2(&f);
    if det == 0.0 || !det.is_finite() {
        return Err(StepError::SingularGradient);
    }
    Ok(divergence(&fdot, &f))
}

/// Push-forward of the reference pressure gradient:
/// `grad p = (dp/dx_n) · dF^{-1}`.
pub fn pressure_gradient<V: Scalar>(dp: [V; 2], f: &[[V; 2]; 2]) -> [V; 2] {
    let det = det2(f);
    [
        (dp[0] * f[1][1] - dp[1] * f[1][0]) / det,
        (dp[1] * f[0][0] - dp[0] * f[0][1]) / det,
    ]
}

/// Stage acceleration from the momentum balance plus wall contact:
/// `a = -(1/rho)·grad p + b + f_c`.
pub fn stage_acceleration<V: Scalar>(
    grad_p: [V; 2],
    props: &FluidProperties,
    contact: [V; 2],
) -> [V; 2] {
    [
        grad_p[0].scale(-1.0 / props.rho).shift(props.body_accel[0]) + contact[0],
        grad_p[1].scale(-1.0 / props.rho).shift(props.body_accel[1]) + contact[1],
    ]
}

/// Residuals of one fluid particle.
///
/// `outs` are the raw network outputs with their spatial tangents; the
/// projection, the product rule for the velocity gradient, the IRK stage
/// kinematics, and the loss terms all happen in the generic scalar domain,
/// so the same code serves the immediate tape, the batched program, and
/// plain evaluation.
pub fn fluid_particle_terms<V: Scalar>(
    ctx: &StepContext<'_>,
    schema: &OutputSchema,
    inp: &ParticleInput<V>,
    outs: &[Dual2<V>],
) -> ParticleTerms<V> {
    let s = ctx.tableau.s;
    debug_assert_eq!(outs.len(), schema.output_width());
    let zero = inp.v_n[0].const_like(0.0);

    let (mx, my) = ctx.projection.multipliers(inp.x[0], inp.x[1]);

    // Projected stage velocities; dual tangents carry the exact product-rule
    // velocity gradient d(D∘v̂)/dx_n.
    let vs = ctx.velocity_scale;
    let v_stages: Vec<[Dual2<V>; 2]> = (0..s)
        .map(|i| {
            [
                mx * outs[schema.vel_stage(i, 0)].scale(vs),
                my * outs[schema.vel_stage(i, 1)].scale(vs),
            ]
        })
        .collect();
    let v_next = [
        mx * outs[schema.vel_next(0)].scale(vs),
        my * outs[schema.vel_next(1)].scale(vs),
    ];

    let fdot: Vec<[[V; 2]; 2]> = v_stages
        .iter()
        .map(|v| [[v[0].dx[0], v[0].dx[1]], [v[1].dx[0], v[1].dx[1]]])
        .collect();
    let fdot_next = [
        [v_next[0].dx[0], v_next[0].dx[1]],
        [v_next[1].dx[0], v_next[1].dx[1]],
    ];
    let (f_stages, f_next) = incremental_gradients(ctx.tableau, ctx.dt, &fdot);

    let mut dets = Vec::with_capacity(s + 1);
    let mut sse_div = zero;
    for i in 0..s {
        dets.push(det2(&f_stages[i]));
        let div = divergence(&fdot[i], &f_stages[i]);
        sse_div = sse_div + div * div;
    }
    dets.push(det2(&f_next));
    let div_next = divergence(&fdot_next, &f_next);
    sse_div = sse_div + div_next * div_next;

    // Stage positions are needed only when wall contact is active.
    let v_values: Vec<[V; 2]> = v_stages.iter().map(|v| [v[0].re, v[1].re]).collect();
    let x_stage_positions = if ctx.contact.enabled() {
        let x_val = [inp.x[0].re, inp.x[1].re];
        Some(ctx.tableau.position_update(ctx.dt, x_val, &v_values).0)
    } else {
        None
    };

    let accels: Vec<[V; 2]> = (0..s)
        .map(|i| {
            let p = outs[schema.pressure(i)];
            let gp = pressure_gradient([p.dx[0], p.dx[1]], &f_stages[i]);
            let fc = match &x_stage_positions {
                Some(xs) => contact_force(xs[i], ctx.contact),
                None => [zero, zero],
            };
            stage_acceleration(gp, &ctx.props, fc)
        })
        .collect();

    let v_next_val = [v_next[0].re, v_next[1].re];
    let (estimates, estimate_last) =
        ctx.tableau
            .velocity_estimates(ctx.dt, &v_values, v_next_val, &accels);

    let mut sse_v = zero;
    for est in estimates.iter().chain(std::iter::once(&estimate_last)) {
        for k in 0..2 {
            let r = est[k] - inp.v_n[k];
            sse_v = sse_v + r * r;
        }
    }

    // Zero-pressure Dirichlet condition on the (Lagrangian) surface set,
    // applied to every pressure stage.
    let mut p_sq = zero;
    for i in 0..s {
        let p = outs[schema.pressure(i)].re;
        p_sq = p_sq + p * p;
    }
    let sse_pbar = inp.surface_weight * p_sq;

    let total = sse_v
        .scale(ctx.weights.velocity)
        .mul_add_c(sse_div, ctx.weights.divergence)
        .mul_add_c(sse_pbar, ctx.weights.pressure_bc);

    ParticleTerms {
        sse_v,
        sse_div,
        sse_pbar,
        total,
        dets,
    }
}

/// Scalar second-order ODE context (one generalized coordinate).
pub struct OdeContext<'a> {
    pub tableau: &'a ButcherTableau,
    pub dt: f64,
}

/// Velocity-estimate residual of the scalar ODE net: outputs are the s
/// velocity stages followed by the next-step velocity; position stages come
/// from the IRK position update and feed the supplied acceleration law
/// `accel(q, qdot)`.
pub fn ode_particle_terms<V: Scalar>(
    ctx: &OdeContext<'_>,
    q_n: V,
    qdot_n: f64,
    outs: &[V],
    accel: impl Fn(V, V) -> V,
) -> V {
    let s = ctx.tableau.s;
    debug_assert_eq!(outs.len(), s + 1);
    let v_stages: Vec<[V; 1]> = outs[..s].iter().map(|&v| [v]).collect();
    let (q_stages, _) = ctx.tableau.position_update(ctx.dt, [q_n], &v_stages);
    let accels: Vec<[V; 1]> = (0..s)
        .map(|i| [accel(q_stages[i][0], outs[i])])
        .collect();
    let (estimates, last) =
        ctx.tableau
            .velocity_estimates(ctx.dt, &v_stages, [outs[s]], &accels);

    let mut sse = q_n.const_like(0.0);
    for est in estimates.iter().chain(std::iter::once(&last)) {
        let r = est[0].shift(-qdot_n);
        sse = sse + r * r;
    }
    sse
}
