use ndarray::Array2;

use crate::diagnostics::energy_record;
use crate::irk::gauss_legendre;
use crate::network::save_checkpoint;
use crate::output::{write_loss_history, write_series, write_snapshot, LossRow, SeriesRow};
use crate::physics::{
    ContactSpec, FluidProperties, FluidSetup, LossWeights, ParticleSet, Projection, Tag,
    WallPlane,
};

use super::seeding::{seed_particles, Distribution, SeedSpec};
use super::{EmitOptions, FluidDriver, ScenarioError, TrainingConfig};

/// Closed-container scenarios: static pressure (flat surface, g = 10) and
/// free sloshing (sine-profile surface, g = 1) share the same machinery.
#[derive(Debug, Clone)]
pub struct ContainerConfig {
    pub w: f64,
    pub h: f64,
    /// Initial surface elevation amplitude; 0 for the static-pressure case.
    pub amplitude: f64,
    pub rho: f64,
    pub gravity: f64,
    pub nx: usize,
    pub ny: usize,
    pub distribution: Distribution,
    /// Total particle count for the random distribution.
    pub random_total: usize,
    pub dt: f64,
    pub steps: usize,
    pub layout: Vec<usize>,
    pub seed: u64,
    pub training: TrainingConfig,
    pub contact_penalty: f64,
    pub input_scale: f64,
    /// Physical velocity scale of the flow, conditioning the network
    /// outputs; O(max |v|) of the expected solution.
    pub velocity_scale: f64,
}

impl ContainerConfig {
    /// Fig-3-style static pressure: unit box, rho = 1, g = 10, 900 nearly
    /// equispaced particles, 50 steps of 1 s.
    pub fn static_pressure() -> Self {
        ContainerConfig {
            w: 1.0,
            h: 1.0,
            amplitude: 0.0,
            rho: 1.0,
            gravity: 10.0,
            nx: 30,
            ny: 30,
            distribution: Distribution::Equispaced,
            random_total: 900,
            dt: 1.0,
            steps: 50,
            layout: vec![2, 60, 60, 62],
            seed: 1,
            training: TrainingConfig::fluid_default(),
            contact_penalty: 1e7,
            input_scale: 1.0,
            velocity_scale: 1.0,
        }
    }

    /// Small-amplitude sloshing defaults: a = 0.01 m, unit box, unit density
    /// and gravity, layout [2, 60, 60, 62] (20 stages), dt = 0.1 s.
    pub fn sloshing() -> Self {
        ContainerConfig {
            amplitude: 0.01,
            gravity: 1.0,
            dt: 0.1,
            steps: 140,
            ..ContainerConfig::static_pressure()
        }
    }

    pub fn stages(&self) -> Option<usize> {
        crate::network::OutputSchema::fluid_stages_for_width(2, *self.layout.last()?)
    }
}

#[derive(Debug)]
pub struct ContainerResult {
    pub particles: ParticleSet,
    pub initial_positions: Array2<f64>,
    pub series: Vec<SeriesRow>,
    pub history: Vec<LossRow>,
    pub final_loss: f64,
    pub gauge_index: usize,
    pub params: crate::network::NetworkParams,
}

/// Runs a closed-container scenario for `cfg.steps` steps.
pub fn run_container(
    cfg: &ContainerConfig,
    emit: &EmitOptions,
) -> Result<ContainerResult, ScenarioError> {
    let spec = SeedSpec {
        w: cfg.w,
        h: cfg.h,
        amplitude: cfg.amplitude,
        nx: cfg.nx,
        ny: cfg.ny,
        total: cfg.random_total,
        distribution: cfg.distribution,
        right_is_wall: true,
        seed: cfg.seed,
    };
    let particles = seed_particles(&spec)?;
    let initial_positions = particles.positions.clone();

    // The amplitude gauge: the surface particle pinned to the left wall.
    let gauge_index = (0..particles.len())
        .filter(|&i| particles.tags[i] == Tag::FreeSurface)
        .min_by(|&a, &b| {
            particles.positions[[a, 0]]
                .partial_cmp(&particles.positions[[b, 0]])
                .unwrap()
        })
        .ok_or_else(|| ScenarioError::Config("no free-surface particles".into()))?;

    let stages = cfg
        .stages()
        .ok_or_else(|| ScenarioError::Config("layout output width invalid".into()))?;
    let setup = FluidSetup {
        tableau: gauss_legendre(stages)?,
        dt: cfg.dt,
        props: FluidProperties {
            rho: cfg.rho,
            body_accel: [0.0, -cfg.gravity],
        },
        projection: Projection::Container { w: cfg.w, h: cfg.h },
        contact: ContactSpec {
            penalty: cfg.contact_penalty,
            walls: container_walls(cfg.w),
        },
        weights: LossWeights::default(),
        input_scale: cfg.input_scale,
        velocity_scale: cfg.velocity_scale,
    };
    let mut driver = FluidDriver::new(&cfg.layout, cfg.seed, setup, particles, cfg.training)?;

    let interval = emit.interval_for(cfg.steps);
    if let Some(path) = emit.snapshot_path(0) {
        write_snapshot(&path, &driver.particles)?;
    }

    let mut series = Vec::with_capacity(cfg.steps);
    let mut final_loss = 0.0;
    for step in 0..cfg.steps {
        final_loss = driver.train_step(step)?;
        driver.advance();
        let t = cfg.dt * (step + 1) as f64;
        let e = energy_record(&driver.particles, &driver.oracle.setup.props, t);
        series.push(SeriesRow {
            t,
            amplitude: driver.particles.positions[[gauge_index, 1]] - cfg.h,
            e_pressure: e.pressure,
            e_kinetic: e.kinetic,
            e_potential: e.potential,
            e_total: e.total,
            front_tip: driver.particles.front_tip(),
        });
        if (step + 1) % interval == 0 || step + 1 == cfg.steps {
            if let Some(path) = emit.snapshot_path(step + 1) {
                write_snapshot(&path, &driver.particles)?;
            }
        }
    }

    if let Some(dir) = &emit.out_dir {
        write_series(&dir.join("series.csv"), &series)?;
        write_loss_history(&dir.join("loss_history.csv"), &driver.history)?;
        if emit.checkpoint {
            save_checkpoint(&dir.join("params.txt"), &driver.oracle.params)
                .map_err(|e| ScenarioError::Config(e.to_string()))?;
        }
    }

    Ok(ContainerResult {
        particles: driver.particles,
        initial_positions,
        series,
        history: driver.history,
        final_loss,
        gauge_index,
        params: driver.oracle.params,
    })
}

fn container_walls(w: f64) -> Vec<WallPlane> {
    vec![
        WallPlane {
            point: [0.0, 0.0],
            outward: [-1.0, 0.0],
        },
        WallPlane {
            point: [w, 0.0],
            outward: [1.0, 0.0],
        },
        WallPlane {
            point: [0.0, 0.0],
            outward: [0.0, -1.0],
        },
    ]
}
