//! Updated-Lagrangian physics for one time step: boundary projection, stage
//! kinematics pushed forward through the incremental deformation gradient,
//! penalty wall contact, residual assembly, and the particle-state update.

mod contact;
mod oracle;
mod projection;
mod residuals;
mod step;

pub use contact::{contact_force, ContactSpec, WallPlane};
pub use oracle::{tape_reference_loss, FluidOracle, FluidProgram, FluidSetup};
pub use projection::Projection;
pub use residuals::{
    divergence, divergence_checked, fluid_particle_terms, incremental_gradients,
    ode_particle_terms, pressure_gradient, stage_acceleration, OdeContext, ParticleInput,
    ParticleTerms, StepContext,
};
pub use step::{advance_step, evaluate_stages, refresh_extents, slip_relax, StageState};

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::autodiff::AdError;

#[derive(Debug, Error)]
pub enum StepError {
    #[error("step rejected: det(dF) = {min_det:e} <= 0 at stage {stage}; reduce the time step")]
    StepRejected { stage: usize, min_det: f64 },
    #[error("singular incremental deformation gradient")]
    SingularGradient,
    #[error(transparent)]
    NonFinite(#[from] AdError),
    #[error("empty particle class: {0}")]
    EmptyTagClass(&'static str),
}

/// Constant material data of the inviscid fluid.
#[derive(Debug, Clone, Copy)]
pub struct FluidProperties {
    /// Density, > 0.
    pub rho: f64,
    /// Gravitational acceleration vector.
    pub body_accel: [f64; 2],
}

/// Boundary role of a collocation point. Tags are assigned once at seeding
/// and tracked Lagrangially; the free-surface set keeps the p = 0 condition
/// for the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Interior,
    WallLeft,
    WallRight,
    WallBottom,
    FreeSurface,
}

impl Tag {
    /// Outward unit normal for wall tags.
    pub fn outward_normal(self) -> Option<[f64; 2]> {
        match self {
            Tag::WallLeft => Some([-1.0, 0.0]),
            Tag::WallRight => Some([1.0, 0.0]),
            Tag::WallBottom => Some([0.0, -1.0]),
            Tag::Interior | Tag::FreeSurface => None,
        }
    }

    pub fn is_wall(self) -> bool {
        self.outward_normal().is_some()
    }
}

/// All collocation points at one time level.
#[derive(Debug, Clone)]
pub struct ParticleSet {
    /// Positions, N×2.
    pub positions: Array2<f64>,
    /// Velocities, N×2.
    pub velocities: Array2<f64>,
    /// Pressure of the previous accepted step (diagnostics), length N.
    pub pressures: Array1<f64>,
    pub tags: Vec<Tag>,
}

impl ParticleSet {
    pub fn new(positions: Array2<f64>, velocities: Array2<f64>, tags: Vec<Tag>) -> Self {
        let n = positions.nrows();
        assert_eq!(velocities.nrows(), n);
        assert_eq!(tags.len(), n);
        ParticleSet {
            positions,
            velocities,
            pressures: Array1::zeros(n),
            tags,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 1.0 for free-surface particles, else 0.0; weights the pressure
    /// boundary residual.
    pub fn surface_weights(&self) -> Array1<f64> {
        Array1::from_iter(
            self.tags
                .iter()
                .map(|t| if *t == Tag::FreeSurface { 1.0 } else { 0.0 }),
        )
    }

    /// Maximum x over all particles (dam-break front tip).
    pub fn front_tip(&self) -> f64 {
        self.positions
            .column(0)
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }
}

/// Relative weighting of the loss terms; the paper's total is the plain sum,
/// so every default is 1.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub velocity: f64,
    pub divergence: f64,
    pub pressure_bc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            velocity: 1.0,
            divergence: 1.0,
            pressure_bc: 1.0,
        }
    }
}

/// The sum-of-squared-errors components of one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub sse_v: f64,
    pub sse_div: f64,
    pub sse_pbar: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(sse_v: f64, sse_div: f64, sse_pbar: f64, weights: &LossWeights) -> Self {
        LossBreakdown {
            sse_v,
            sse_div,
            sse_pbar,
            total: weights.velocity * sse_v
                + weights.divergence * sse_div
                + weights.pressure_bc * sse_pbar,
        }
    }
}
