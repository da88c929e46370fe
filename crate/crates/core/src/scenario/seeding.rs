use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ScenarioError;
use crate::physics::{ParticleSet, Tag};

/// Initial free-surface profile: `eta(x) = h - a·sin(pi/w·(x - w/2))`.
pub fn surface_elevation(x: f64, w: f64, h: f64, a: f64) -> f64 {
    h - a * (std::f64::consts::PI / w * (x - w / 2.0)).sin()
}

/// How collocation points fill the fluid domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// Tensor grid, boundaries included.
    Equispaced,
    /// Tensor grid with interior points perturbed uniformly by up to
    /// `magnitude`·spacing in each direction.
    Jittered { magnitude: f64 },
    /// `per_boundary` random points on each fluid boundary, the rest
    /// uniformly random inside.
    Random { per_boundary: usize },
}

/// Seeding geometry: a w×h body of fluid whose top follows the elevation
/// profile. `right_is_wall` distinguishes the closed container from the
/// dam-break column (free right face).
#[derive(Debug, Clone)]
pub struct SeedSpec {
    pub w: f64,
    pub h: f64,
    pub amplitude: f64,
    pub nx: usize,
    pub ny: usize,
    pub total: usize,
    pub distribution: Distribution,
    pub right_is_wall: bool,
    pub seed: u64,
}

/// Boundary tag from the pre-elevation grid location. Resolution order for
/// corners: bottom beats the sides; the surface beats the sides at the top
/// (the top corners carry the pressure condition and the left one serves as
/// the amplitude gauge).
fn tag_for(col: usize, row: usize, nx: usize, ny: usize, right_is_wall: bool) -> Tag {
    if row == 0 {
        Tag::WallBottom
    } else if row == ny - 1 {
        Tag::FreeSurface
    } else if col == 0 {
        Tag::WallLeft
    } else if col == nx - 1 {
        if right_is_wall {
            Tag::WallRight
        } else {
            Tag::FreeSurface
        }
    } else {
        Tag::Interior
    }
}

/// Builds the initial particle set at rest. Deterministic for a fixed seed.
pub fn seed_particles(spec: &SeedSpec) -> Result<ParticleSet, ScenarioError> {
    let particles = match spec.distribution {
        Distribution::Equispaced => grid(spec, 0.0, 0),
        Distribution::Jittered { magnitude } => grid(spec, magnitude, spec.seed),
        Distribution::Random { per_boundary } => random(spec, per_boundary)?,
    };
    if particles.len() < 4 {
        return Err(ScenarioError::TooFewParticles(particles.len()));
    }
    Ok(particles)
}

fn grid(spec: &SeedSpec, jitter: f64, seed: u64) -> ParticleSet {
    let (nx, ny) = (spec.nx, spec.ny);
    let n = nx * ny;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dx = spec.w / (nx - 1) as f64;
    let dy = spec.h / (ny - 1) as f64;
    let mut pos = Array2::zeros((n, 2));
    let mut tags = Vec::with_capacity(n);
    let mut idx = 0;
    for row in 0..ny {
        for col in 0..nx {
            let mut x = spec.w * col as f64 / (nx - 1) as f64;
            let mut y = spec.h * row as f64 / (ny - 1) as f64;
            let tag = tag_for(col, row, nx, ny, spec.right_is_wall);
            if jitter > 0.0 && tag == Tag::Interior {
                x += rng.random_range(-jitter..jitter) * dx;
                y += rng.random_range(-jitter..jitter) * dy;
            }
            // Columns follow the surface elevation; the bottom row stays put.
            y *= surface_elevation(x, spec.w, spec.h, spec.amplitude) / spec.h;
            pos[[idx, 0]] = x;
            pos[[idx, 1]] = y;
            tags.push(tag);
            idx += 1;
        }
    }
    ParticleSet::new(pos, Array2::zeros((n, 2)), tags)
}

fn random(spec: &SeedSpec, per_boundary: usize) -> Result<ParticleSet, ScenarioError> {
    let n_boundaries = if spec.right_is_wall { 4 } else { 4 };
    let boundary_total = n_boundaries * per_boundary;
    if spec.total < boundary_total {
        return Err(ScenarioError::Config(format!(
            "total particle count {} below boundary count {}",
            spec.total, boundary_total
        )));
    }
    let interior = spec.total - boundary_total;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pos = Array2::zeros((spec.total, 2));
    let mut tags = Vec::with_capacity(spec.total);
    let mut idx = 0;
    let mut push = |x: f64, y: f64, tag: Tag, pos: &mut Array2<f64>, tags: &mut Vec<Tag>| {
        pos[[idx, 0]] = x;
        pos[[idx, 1]] = y;
        tags.push(tag);
        idx += 1;
    };

    let eta = |x: f64| surface_elevation(x, spec.w, spec.h, spec.amplitude);
    for _ in 0..per_boundary {
        let x = rng.random_range(0.0..spec.w);
        push(x, 0.0, Tag::WallBottom, &mut pos, &mut tags);
    }
    for _ in 0..per_boundary {
        let y = rng.random_range(0.0..eta(0.0));
        push(0.0, y, Tag::WallLeft, &mut pos, &mut tags);
    }
    for _ in 0..per_boundary {
        if spec.right_is_wall {
            let y = rng.random_range(0.0..eta(spec.w));
            push(spec.w, y, Tag::WallRight, &mut pos, &mut tags);
        } else {
            let y = rng.random_range(0.0..eta(spec.w));
            push(spec.w, y, Tag::FreeSurface, &mut pos, &mut tags);
        }
    }
    for _ in 0..per_boundary {
        let x = rng.random_range(0.0..spec.w);
        push(x, eta(x), Tag::FreeSurface, &mut pos, &mut tags);
    }
    for _ in 0..interior {
        let x = rng.random_range(0.0..spec.w);
        let y = rng.random_range(0.0..eta(x));
        push(x, y, Tag::Interior, &mut pos, &mut tags);
    }
    Ok(ParticleSet::new(
        pos,
        Array2::zeros((spec.total, 2)),
        tags,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_spec(nx: usize, ny: usize, a: f64) -> SeedSpec {
        SeedSpec {
            w: 1.0,
            h: 1.0,
            amplitude: a,
            nx,
            ny,
            total: nx * ny,
            distribution: Distribution::Equispaced,
            right_is_wall: true,
            seed: 0,
        }
    }

    #[test]
    fn elevation_formula() {
        assert_eq!(surface_elevation(0.5, 1.0, 1.0, 0.01), 1.0);
        assert!((surface_elevation(0.0, 1.0, 1.0, 0.01) - 1.01).abs() < 1e-15);
        assert!((surface_elevation(1.0, 1.0, 1.0, 0.01) - 0.99).abs() < 1e-15);
    }

    #[test]
    fn corner_tags_resolve_deterministically() {
        let p = seed_particles(&unit_spec(3, 3, 0.0)).unwrap();
        // Bottom-left corner is bottom (bottom beats side).
        assert_eq!(p.tags[0], Tag::WallBottom);
        assert_eq!(p.positions[[0, 0]], 0.0);
        assert_eq!(p.positions[[0, 1]], 0.0);
        // Top corners carry the surface condition.
        assert_eq!(p.tags[6], Tag::FreeSurface);
        assert_eq!(p.tags[8], Tag::FreeSurface);
        // Mid-sides are walls.
        assert_eq!(p.tags[3], Tag::WallLeft);
        assert_eq!(p.tags[5], Tag::WallRight);
    }

    #[test]
    fn jitter_is_reproducible_and_bounded() {
        let mut spec = unit_spec(5, 5, 0.0);
        spec.distribution = Distribution::Jittered { magnitude: 0.4 };
        spec.seed = 9;
        let a = seed_particles(&spec).unwrap();
        let b = seed_particles(&spec).unwrap();
        assert_eq!(a.positions, b.positions);
        // Boundary particles stay exactly on the boundary.
        for i in 0..a.len() {
            match a.tags[i] {
                Tag::WallBottom => assert_eq!(a.positions[[i, 1]], 0.0),
                Tag::WallLeft => assert_eq!(a.positions[[i, 0]], 0.0),
                Tag::WallRight => assert_eq!(a.positions[[i, 0]], 1.0),
                _ => {}
            }
        }
    }

    #[test]
    fn surface_midpoint_sits_at_h_exactly() {
        let p = seed_particles(&unit_spec(5, 5, 0.01)).unwrap();
        // Middle column top particle: eta(w/2) = h.
        let idx = 4 * 5 + 2;
        assert_eq!(p.tags[idx], Tag::FreeSurface);
        assert_eq!(p.positions[[idx, 0]], 0.5);
        assert_eq!(p.positions[[idx, 1]], 1.0);
    }

    #[test]
    fn too_few_particles_rejected() {
        let spec = SeedSpec {
            nx: 1,
            ny: 2,
            total: 2,
            ..unit_spec(1, 2, 0.0)
        };
        assert!(matches!(
            seed_particles(&spec),
            Err(ScenarioError::TooFewParticles(_))
        ));
    }

    #[test]
    fn random_distribution_counts_and_bounds() {
        let mut spec = unit_spec(0, 0, 0.2);
        spec.distribution = Distribution::Random { per_boundary: 100 };
        spec.total = 900;
        spec.seed = 3;
        let p = seed_particles(&spec).unwrap();
        assert_eq!(p.len(), 900);
        let surface = p.tags.iter().filter(|t| **t == Tag::FreeSurface).count();
        assert_eq!(surface, 100);
        let interior = p.tags.iter().filter(|t| **t == Tag::Interior).count();
        assert_eq!(interior, 500);
        for i in 0..p.len() {
            let (x, y) = (p.positions[[i, 0]], p.positions[[i, 1]]);
            assert!((0.0..=1.0).contains(&x));
            assert!(y >= 0.0 && y <= surface_elevation(x, 1.0, 1.0, 0.2) + 1e-12);
        }
    }
}
