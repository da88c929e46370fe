//! Plain-text `key = value` run configuration and scenario resolution.
//!
//! Files may group keys under `[section]` headers; sections are
//! organizational only and keys are globally unique. `#` starts a comment.
//! Defaults reproduce the headline runs of each scenario, so an empty config
//! is valid.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::scenario::{
    ContainerConfig, DamBreakConfig, Distribution, MsdConfig, MsdProblem, TrainingConfig,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: cannot parse {value:?} as {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("unsupported scenario `{0}` (expected msd | static-pressure | sloshing | dambreak)")]
    UnsupportedScenario(String),
}

/// Parsed key/value pairs with consumption tracking: any key never read by
/// the resolver is reported as unknown, by name.
#[derive(Debug, Default)]
pub struct ConfigMap {
    map: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl ConfigMap {
    pub fn empty() -> Self {
        ConfigMap::default()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: i + 1,
                    msg: format!("expected `key = value`, got {raw:?}"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if map.insert(key.clone(), value).is_some() {
                return Err(ConfigError::DuplicateKey(key));
            }
        }
        Ok(ConfigMap {
            map,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    /// Inserts or overrides a value (command-line flags, env overrides).
    pub fn set(&mut self, key: &str, value: String) {
        self.map.insert(key.to_string(), value);
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let v = self.map.get(key);
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v.map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
                expected,
            }),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.get::<f64>(key, "a number")?.unwrap_or(default))
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.get::<usize>(key, "an unsigned integer")?.unwrap_or(default))
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        Ok(self.get::<u64>(key, "an unsigned integer")?.unwrap_or(default))
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        Ok(self.get::<bool>(key, "true or false")?.unwrap_or(default))
    }

    fn layout_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, ConfigError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|t| {
                    t.trim().parse::<usize>().map_err(|_| ConfigError::BadValue {
                        key: key.to_string(),
                        value: v.to_string(),
                        expected: "a comma-separated list of layer widths",
                    })
                })
                .collect(),
        }
    }

    /// Errors on the first key that no resolver consumed.
    pub fn ensure_consumed(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        for key in self.map.keys() {
            if !used.contains(key) {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }
        Ok(())
    }
}

/// A fully resolved run.
#[derive(Debug)]
pub struct RunConfig {
    pub scenario_name: String,
    pub scenario: ScenarioSpec,
    pub out_dir: Option<PathBuf>,
    pub snapshot_interval: usize,
    pub checkpoint: bool,
    pub experiment_csv: Option<PathBuf>,
}

#[derive(Debug)]
pub enum ScenarioSpec {
    Msd(MsdConfig),
    StaticPressure(ContainerConfig),
    Sloshing(ContainerConfig),
    DamBreak(DamBreakConfig),
}

fn training(map: &ConfigMap, base: TrainingConfig) -> Result<TrainingConfig, ConfigError> {
    Ok(TrainingConfig {
        adam_iters_first: map.usize_or("adam_iters_first", base.adam_iters_first)?,
        adam_iters: map.usize_or("adam_iters", base.adam_iters)?,
        adam_lr: map.f64_or("adam_lr", base.adam_lr)?,
        lbfgs_max_iter_first: map.usize_or("lbfgs_max_iter_first", base.lbfgs_max_iter_first)?,
        lbfgs_max_iter: map.usize_or("lbfgs_max_iter", base.lbfgs_max_iter)?,
        lbfgs_g_tol: map.f64_or("lbfgs_g_tol", base.lbfgs_g_tol)?,
        lbfgs_f_tol: map.f64_or("lbfgs_f_tol", base.lbfgs_f_tol)?,
    })
}

fn steps_from(map: &ConfigMap, dt: f64, default_total: f64) -> Result<usize, ConfigError> {
    if let Some(steps) = map.get::<usize>("steps", "an unsigned integer")? {
        return Ok(steps);
    }
    let total = map.f64_or("total_time", default_total)?;
    Ok(((total / dt) + 1e-9).floor() as usize)
}

fn distribution(map: &ConfigMap, default: Distribution) -> Result<Distribution, ConfigError> {
    let Some(name) = map.raw("distribution") else {
        return Ok(default);
    };
    match name {
        "equispaced" => Ok(Distribution::Equispaced),
        "jittered" => Ok(Distribution::Jittered {
            magnitude: map.f64_or("jitter", 0.4)?,
        }),
        "random" => Ok(Distribution::Random {
            per_boundary: map.usize_or("per_boundary", 100)?,
        }),
        other => Err(ConfigError::BadValue {
            key: "distribution".into(),
            value: other.into(),
            expected: "equispaced | jittered | random",
        }),
    }
}

/// Resolves a scenario from a parsed map; every key has a documented default
/// and unknown keys are rejected by name.
pub fn resolve(scenario_name: &str, map: &ConfigMap) -> Result<RunConfig, ConfigError> {
    let scenario = match scenario_name {
        "msd" => {
            let base = MsdConfig::default();
            let dt = map.f64_or("dt", base.dt)?;
            ScenarioSpec::Msd(MsdConfig {
                problem: MsdProblem {
                    mass: map.f64_or("mass", base.problem.mass)?,
                    stiffness: map.f64_or("stiffness", base.problem.stiffness)?,
                    damping: map.f64_or("damping", base.problem.damping)?,
                    q0: map.f64_or("q0", base.problem.q0)?,
                },
                dt,
                steps: steps_from(map, dt, 20.0)?,
                layout: map.layout_or("layout", &base.layout)?,
                seed: map.u64_or("seed", base.seed)?,
                training: training(map, base.training)?,
            })
        }
        "static-pressure" | "sloshing" => {
            let base = if scenario_name == "sloshing" {
                ContainerConfig::sloshing()
            } else {
                ContainerConfig::static_pressure()
            };
            let dt = map.f64_or("dt", base.dt)?;
            let default_total = base.dt * base.steps as f64;
            let cfg = ContainerConfig {
                w: map.f64_or("w", base.w)?,
                h: map.f64_or("h", base.h)?,
                amplitude: map.f64_or("amplitude", base.amplitude)?,
                rho: map.f64_or("rho", base.rho)?,
                gravity: map.f64_or("gravity", base.gravity)?,
                nx: map.usize_or("nx", base.nx)?,
                ny: map.usize_or("ny", base.ny)?,
                distribution: distribution(map, base.distribution)?,
                random_total: map.usize_or("random_total", base.random_total)?,
                dt,
                steps: steps_from(map, dt, default_total)?,
                layout: map.layout_or("layout", &base.layout)?,
                seed: map.u64_or("seed", base.seed)?,
                training: training(map, base.training)?,
                contact_penalty: map.f64_or("penalty", base.contact_penalty)?,
                input_scale: map.f64_or("input_scale", base.input_scale)?,
                velocity_scale: map.f64_or("velocity_scale", base.velocity_scale)?,
            };
            if scenario_name == "sloshing" {
                ScenarioSpec::Sloshing(cfg)
            } else {
                ScenarioSpec::StaticPressure(cfg)
            }
        }
        "dambreak" => {
            let base = DamBreakConfig::default();
            let dt = map.f64_or("dt", base.dt)?;
            ScenarioSpec::DamBreak(DamBreakConfig {
                length: map.f64_or("length", base.length)?,
                gravity: map.f64_or("gravity", base.gravity)?,
                rho: map.f64_or("rho", base.rho)?,
                particles_per_length: map
                    .usize_or("particles_per_length", base.particles_per_length)?,
                dt,
                steps: steps_from(map, dt, 0.3)?,
                layout: map.layout_or("layout", &base.layout)?,
                seed: map.u64_or("seed", base.seed)?,
                training: training(map, base.training)?,
                contact_penalty: map.f64_or("penalty", base.contact_penalty)?,
                slip_threshold: map.get::<f64>("slip_threshold", "a number")?,
                tstar_factor: map.f64_or("tstar_factor", base.tstar_factor)?,
                velocity_scale: map.f64_or("velocity_scale", base.velocity_scale)?,
            })
        }
        other => return Err(ConfigError::UnsupportedScenario(other.to_string())),
    };

    let run = RunConfig {
        scenario_name: scenario_name.to_string(),
        scenario,
        out_dir: map.raw("out_dir").map(PathBuf::from),
        snapshot_interval: map.usize_or("snapshot_interval", 0)?,
        checkpoint: map.bool_or("checkpoint", false)?,
        experiment_csv: map.raw("experiment_csv").map(PathBuf::from),
    };
    map.ensure_consumed()?;
    Ok(run)
}

/// Environment overrides: `NPARTICLE_<KEY>` (uppercase) maps to `<key>`.
/// Applied between file values and command-line flags.
pub fn apply_env_overrides(map: &mut ConfigMap) {
    for (name, value) in std::env::vars() {
        if let Some(key) = name.strip_prefix("NPARTICLE_") {
            map.set(&key.to_ascii_lowercase(), value);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sloshing_config_gives_paper_defaults() {
        let map = ConfigMap::empty();
        let run = resolve("sloshing", &map).unwrap();
        let ScenarioSpec::Sloshing(cfg) = run.scenario else {
            panic!("wrong scenario kind");
        };
        assert_eq!(cfg.layout, vec![2, 60, 60, 62]);
        assert_eq!(cfg.stages(), Some(20));
        assert_eq!(cfg.dt, 0.1);
        assert_eq!(cfg.steps, 140);
        assert_eq!(cfg.nx * cfg.ny, 900);
    }

    #[test]
    fn flag_style_override_beats_file_value() {
        let mut map = ConfigMap::parse("dt = 0.1\n[particles]\nnx = 10\n").unwrap();
        map.set("dt", "0.05".to_string());
        let run = resolve("sloshing", &map).unwrap();
        let ScenarioSpec::Sloshing(cfg) = run.scenario else {
            panic!();
        };
        assert_eq!(cfg.dt, 0.05);
        assert_eq!(cfg.nx, 10);
    }

    #[test]
    fn unknown_scenario_and_key_are_errors() {
        let map = ConfigMap::empty();
        assert!(matches!(
            resolve("viscous", &map),
            Err(ConfigError::UnsupportedScenario(_))
        ));
        let map = ConfigMap::parse("viscosity = 1.0\n").unwrap();
        match resolve("sloshing", &map) {
            Err(ConfigError::UnknownKey(k)) => assert_eq!(k, "viscosity"),
            other => panic!("expected UnknownKey, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_rejected() {
        assert!(matches!(
            ConfigMap::parse("dt = 0.1\ndt = 0.2\n"),
            Err(ConfigError::DuplicateKey(_))
        ));
    }

    #[test]
    fn msd_steps_from_total_time() {
        let map = ConfigMap::empty();
        let run = resolve("msd", &map).unwrap();
        let ScenarioSpec::Msd(cfg) = run.scenario else {
            panic!();
        };
        // dt = pi, horizon 20: six whole steps fit.
        assert_eq!(cfg.steps, 6);
        assert_eq!(cfg.layout, vec![1, 20, 20, 9]);
    }

    #[test]
    fn comments_and_sections_are_ignored() {
        let map = ConfigMap::parse("# a comment\n[time]\ndt = 0.2 # trailing\n").unwrap();
        let run = resolve("static-pressure", &map).unwrap();
        let ScenarioSpec::StaticPressure(cfg) = run.scenario else {
            panic!();
        };
        assert_eq!(cfg.dt, 0.2);
    }
}
