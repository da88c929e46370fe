use ndarray::Array2;

use crate::autodiff::Scalar;
use crate::irk::ButcherTableau;
use crate::network::{NetworkParams, OutputSchema};

use super::{ParticleSet, Projection, StepError, Tag};

/// Trained per-particle stage values, already projected: the network output
/// of the accepted step evaluated for every particle.
pub struct StageState {
    /// s entries of shape (2, N).
    pub v_stages: Vec<Array2<f64>>,
    /// (2, N).
    pub v_next: Array2<f64>,
    /// (s, N).
    pub p_stages: Array2<f64>,
}

/// Evaluates the trained network at every particle and applies the boundary
/// projection. Plain values; no derivatives needed to advance the state.
pub fn evaluate_stages(
    params: &NetworkParams,
    schema: &OutputSchema,
    projection: Projection,
    input_scale: f64,
    velocity_scale: f64,
    particles: &ParticleSet,
) -> StageState {
    let n = particles.len();
    let s = schema.stages;
    let mut v_stages = vec![Array2::zeros((2, n)); s];
    let mut v_next = Array2::zeros((2, n));
    let mut p_stages = Array2::zeros((s, n));

    for i in 0..n {
        let x = [particles.positions[[i, 0]], particles.positions[[i, 1]]];
        let out = params
            .forward(&[x[0] / input_scale, x[1] / input_scale])
            .expect("network input width is 2");
        let (mx, my) = projection.multipliers_f64(x[0], x[1]);
        for stage in 0..s {
            v_stages[stage][[0, i]] = mx * out[schema.vel_stage(stage, 0)].scale(velocity_scale);
            v_stages[stage][[1, i]] = my * out[schema.vel_stage(stage, 1)].scale(velocity_scale);
            p_stages[[stage, i]] = out[schema.pressure(stage)];
        }
        v_next[[0, i]] = mx * out[schema.vel_next(0)].scale(velocity_scale);
        v_next[[1, i]] = my * out[schema.vel_next(1)].scale(velocity_scale);
    }
    StageState {
        v_stages,
        v_next,
        p_stages,
    }
}

/// Installs the accepted update: positions from the IRK position update,
/// velocity from the network's next-step output, pressure as the b-weighted
/// stage average. Tags are Lagrangian and never change here.
pub fn advance_step(
    particles: &mut ParticleSet,
    tableau: &ButcherTableau,
    dt: f64,
    stages: &StageState,
) {
    let n = particles.len();
    let s = tableau.s;
    for i in 0..n {
        let x_n = [particles.positions[[i, 0]], particles.positions[[i, 1]]];
        let v: Vec<[f64; 2]> = (0..s)
            .map(|j| [stages.v_stages[j][[0, i]], stages.v_stages[j][[1, i]]])
            .collect();
        let (_, x_next) = tableau.position_update(dt, x_n, &v);
        particles.positions[[i, 0]] = x_next[0];
        particles.positions[[i, 1]] = x_next[1];
        particles.velocities[[i, 0]] = stages.v_next[[0, i]];
        particles.velocities[[i, 1]] = stages.v_next[[1, i]];
        let mut p = 0.0;
        for j in 0..s {
            p += tableau.b[j] * stages.p_stages[[j, i]];
        }
        particles.pressures[i] = p;
    }
}

/// Slip relaxation at container edges (dam break): a wall particle that gets
/// within `threshold` of the perpendicular wall while moving toward it is
/// carried around the corner and re-tagged, so the linear projection does
/// not pin it. Returns the number of re-tagged particles.
pub fn slip_relax(particles: &mut ParticleSet, threshold: f64) -> usize {
    if threshold <= 0.0 {
        return 0;
    }
    let mut moved = 0;
    for i in 0..particles.len() {
        let y = particles.positions[[i, 1]];
        let x = particles.positions[[i, 0]];
        match particles.tags[i] {
            // Sliding down the left wall into the bottom corner.
            Tag::WallLeft if y < threshold && particles.velocities[[i, 1]] < 0.0 => {
                particles.tags[i] = Tag::WallBottom;
                particles.positions[[i, 0]] = y;
                particles.positions[[i, 1]] = 0.0;
                moved += 1;
            }
            // Sliding left along the bottom into the same corner.
            Tag::WallBottom if x < threshold && particles.velocities[[i, 0]] < 0.0 => {
                particles.tags[i] = Tag::WallLeft;
                particles.positions[[i, 0]] = 0.0;
                particles.positions[[i, 1]] = x;
                moved += 1;
            }
            _ => {}
        }
    }
    moved
}

/// Current fluid extents along the walls: width from the bottom-wall
/// particles, height from the left-wall particles. The dam-break projection
/// is rebuilt from these before every step.
pub fn refresh_extents(particles: &ParticleSet) -> Result<(f64, f64), StepError> {
    let mut w = f64::NEG_INFINITY;
    let mut h = f64::NEG_INFINITY;
    let mut seen_bottom = false;
    let mut seen_left = false;
    for i in 0..particles.len() {
        match particles.tags[i] {
            Tag::WallBottom => {
                seen_bottom = true;
                w = w.max(particles.positions[[i, 0]]);
            }
            Tag::WallLeft => {
                seen_left = true;
                h = h.max(particles.positions[[i, 1]]);
            }
            _ => {}
        }
    }
    if !seen_bottom {
        return Err(StepError::EmptyTagClass("wall-bottom"));
    }
    if !seen_left {
        return Err(StepError::EmptyTagClass("wall-left"));
    }
    Ok((w, h))
}
