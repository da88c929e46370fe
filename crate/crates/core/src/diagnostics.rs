//! Run diagnostics: specific energy bookkeeping, oscillation period
//! measurement, and boundary-leak checks.

use crate::physics::{FluidProperties, ParticleSet};

/// Mean specific energies over the particle set at one time level:
/// `E_tot = p + rho·|v|²/2 + rho·g·y`, component by component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    pub pressure: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

pub fn energy_record(particles: &ParticleSet, props: &FluidProperties, t: f64) -> EnergyRecord {
    let n = particles.len() as f64;
    let g = -props.body_accel[1];
    let mut pressure = 0.0;
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for i in 0..particles.len() {
        let (vx, vy) = (particles.velocities[[i, 0]], particles.velocities[[i, 1]]);
        pressure += particles.pressures[i];
        kinetic += 0.5 * props.rho * (vx * vx + vy * vy);
        potential += props.rho * g * particles.positions[[i, 1]];
    }
    pressure /= n;
    kinetic /= n;
    potential /= n;
    EnergyRecord {
        t,
        pressure,
        kinetic,
        potential,
        total: pressure + kinetic + potential,
    }
}

/// Oscillation period from an amplitude trace, via linearly interpolated
/// downward zero crossings. Returns None with fewer than two crossings.
pub fn measure_period(times: &[f64], amplitudes: &[f64]) -> Option<f64> {
    assert_eq!(times.len(), amplitudes.len());
    let mut crossings = Vec::new();
    for i in 1..times.len() {
        let (a0, a1) = (amplitudes[i - 1], amplitudes[i]);
        if a0 > 0.0 && a1 <= 0.0 {
            let frac = a0 / (a0 - a1);
            crossings.push(times[i - 1] + frac * (times[i] - times[i - 1]));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    Some((crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64)
}

/// Largest signed exit distance from the open-top container [0,w]×[0,h]:
/// positive means a particle is outside a wall.
pub fn max_wall_gap(particles: &ParticleSet, w: f64) -> f64 {
    let mut gap = f64::NEG_INFINITY;
    for i in 0..particles.len() {
        let (x, y) = (particles.positions[[i, 0]], particles.positions[[i, 1]]);
        gap = gap.max(-x).max(x - w).max(-y);
    }
    gap
}

/// RMS deviation of the recorded particle pressures from the hydrostatic
/// field `rho·g·(h - y)`.
pub fn hydrostatic_rms_error(particles: &ParticleSet, props: &FluidProperties, h: f64) -> f64 {
    let g = -props.body_accel[1];
    let mut sum = 0.0;
    for i in 0..particles.len() {
        let exact = props.rho * g * (h - particles.positions[[i, 1]]);
        let d = particles.pressures[i] - exact;
        sum += d * d;
    }
    (sum / particles.len() as f64).sqrt()
}

pub fn max_speed(particles: &ParticleSet) -> f64 {
    let mut m = 0.0f64;
    for i in 0..particles.len() {
        let (vx, vy) = (particles.velocities[[i, 0]], particles.velocities[[i, 1]]);
        m = m.max((vx * vx + vy * vy).sqrt());
    }
    m
}

/// Largest displacement between two position arrays of the same layout.
pub fn max_displacement(a: &ndarray::Array2<f64>, b: &ndarray::Array2<f64>) -> f64 {
    let mut m = 0.0f64;
    for i in 0..a.nrows() {
        let dx = a[[i, 0]] - b[[i, 0]];
        let dy = a[[i, 1]] - b[[i, 1]];
        m = m.max((dx * dx + dy * dy).sqrt());
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::Tag;
    use ndarray::array;

    #[test]
    fn energy_of_a_single_moving_particle() {
        let mut p = ParticleSet::new(
            array![[0.5, 0.0]],
            array![[1.0, 0.0]],
            vec![Tag::Interior],
        );
        p.pressures[0] = 0.0;
        let props = FluidProperties {
            rho: 1.0,
            body_accel: [0.0, -1.0],
        };
        let e = energy_record(&p, &props, 0.0);
        assert_eq!(e.kinetic, 0.5);
        assert_eq!(e.potential, 0.0);
        assert_eq!(e.pressure, 0.0);
        assert_eq!(e.total, 0.5);
    }

    #[test]
    fn energy_components_sum_exactly() {
        let mut p = ParticleSet::new(
            array![[0.1, 0.7], [0.9, 0.3]],
            array![[0.2, -0.1], [0.0, 0.4]],
            vec![Tag::Interior, Tag::Interior],
        );
        p.pressures[0] = 3.0;
        p.pressures[1] = -1.0;
        let props = FluidProperties {
            rho: 2.5,
            body_accel: [0.0, -9.8],
        };
        let e = energy_record(&p, &props, 1.0);
        assert_eq!(e.total, e.pressure + e.kinetic + e.potential);
    }

    #[test]
    fn resting_fluid_has_zero_kinetic_energy() {
        let p = ParticleSet::new(
            array![[0.5, 0.5], [0.2, 0.8]],
            array![[0.0, 0.0], [0.0, 0.0]],
            vec![Tag::Interior, Tag::Interior],
        );
        let props = FluidProperties {
            rho: 1.0,
            body_accel: [0.0, -10.0],
        };
        assert_eq!(energy_record(&p, &props, 0.0).kinetic, 0.0);
    }

    #[test]
    fn period_of_a_sampled_cosine() {
        let omega = 1.7715f64;
        let period = 2.0 * std::f64::consts::PI / omega;
        let times: Vec<f64> = (0..140).map(|i| 0.1 * (i + 1) as f64).collect();
        let amps: Vec<f64> = times.iter().map(|&t| 0.01 * (omega * t).cos()).collect();
        let measured = measure_period(&times, &amps).unwrap();
        assert!(
            (measured - period).abs() / period < 1e-3,
            "measured {measured} vs {period}"
        );
    }

    #[test]
    fn wall_gap_detects_escapes() {
        let inside = ParticleSet::new(
            array![[0.5, 0.5]],
            array![[0.0, 0.0]],
            vec![Tag::Interior],
        );
        assert!(max_wall_gap(&inside, 1.0) < 0.0);
        let outside = ParticleSet::new(
            array![[1.25, 0.5]],
            array![[0.0, 0.0]],
            vec![Tag::Interior],
        );
        assert!((max_wall_gap(&outside, 1.0) - 0.25).abs() < 1e-15);
    }
}
