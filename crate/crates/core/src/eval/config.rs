//! Experiment configuration, read from TOML. Every section is optional and
//! falls back to the desk-scale defaults; unknown keys are rejected.

use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::env::{
    generate_canyon, generate_forest, CanyonParams, ControlBounds, FieldKind, ForestParams,
    ObstacleField, SensorConfig, TaskCost, VehicleModel,
};
use crate::error::{Error, Result};
use crate::learners::{BetaSchedule, Method};
use crate::policy::PolicyConfig;
use crate::trajopt::MpcConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleConfig {
    pub dt: f64,
    /// Collision radius of the vehicle disc (m).
    pub radius: f64,
    /// Standard deviation of additive actuator noise.
    pub actuator_noise: f64,
    pub bounds: ControlBounds,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        VehicleConfig {
            dt: 0.05,
            radius: 0.25,
            actuator_noise: 0.1,
            bounds: ControlBounds::default(),
        }
    }
}

impl VehicleConfig {
    pub fn model(&self) -> Result<VehicleModel> {
        VehicleModel::new(self.dt, self.bounds)
    }
}

/// Switches the world to `kind` from `iteration` onward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSwitch {
    pub iteration: usize,
    pub kind: FieldKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    /// World used from the first iteration until the first switch.
    pub kind: FieldKind,
    /// Sorted by iteration.
    pub switch: Vec<WorldSwitch>,
    /// Minimum obstacle distance at respawn (m).
    pub respawn_clearance: f64,
    pub forest: ForestParams,
    pub canyon: CanyonParams,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            kind: FieldKind::Forest,
            switch: Vec::new(),
            respawn_clearance: 1.5,
            forest: ForestParams::default(),
            canyon: CanyonParams::default(),
        }
    }
}

impl WorldConfig {
    /// The canyon → forest → canyon schedule over `iterations`, switching at
    /// the thirds.
    pub fn switching(iterations: usize) -> Self {
        let third = iterations.div_ceil(3).max(1);
        WorldConfig {
            kind: FieldKind::Canyon,
            switch: vec![
                WorldSwitch {
                    iteration: third + 1,
                    kind: FieldKind::Forest,
                },
                WorldSwitch {
                    iteration: 2 * third + 1,
                    kind: FieldKind::Canyon,
                },
            ],
            ..WorldConfig::default()
        }
    }

    pub fn kind_at(&self, iteration: usize) -> FieldKind {
        self.switch
            .iter()
            .rev()
            .find(|s| s.iteration <= iteration)
            .map_or(self.kind, |s| s.kind)
    }

    /// First iteration of the world segment containing `iteration`.
    pub fn segment_start(&self, iteration: usize) -> usize {
        self.switch
            .iter()
            .rev()
            .find(|s| s.iteration <= iteration)
            .map_or(1, |s| s.iteration.max(1))
    }

    pub fn generate(&self, kind: FieldKind, seed: u64, vehicle_radius: f64) -> Result<ObstacleField> {
        match kind {
            FieldKind::Empty => Ok(ObstacleField::empty()),
            FieldKind::Forest => generate_forest(seed, &self.forest),
            FieldKind::Canyon => generate_canyon(seed, &self.canyon, vehicle_radius),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.switch.windows(2).all(|w| w[0].iteration < w[1].iteration) {
            return Err(Error::Config("world.switch must be sorted by iteration".into()));
        }
        if !(self.respawn_clearance >= 0.0) {
            return Err(Error::Config("world.respawn_clearance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Lateral velocity commands appended to the observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandConfig {
    /// Lateral command drawn uniformly from `±lateral_range` (m/s).
    pub lateral_range: f64,
    /// A new command is drawn once the velocity is this close to the current
    /// one (m/s).
    pub tolerance: f64,
}

impl Default for CommandConfig {
    fn default() -> Self {
        CommandConfig {
            lateral_range: 1.0,
            tolerance: 0.1,
        }
    }
}

impl CommandConfig {
    pub fn sample<R: rand::Rng + ?Sized>(&self, forward: f64, rng: &mut R) -> Vector2<f64> {
        Vector2::new(forward, rng.random_range(-self.lateral_range..=self.lateral_range))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub episodes: usize,
    /// Episode length cap (s).
    pub max_time: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            episodes: 10,
            max_time: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub method: Method,
    /// Mixing schedule for DAgger and coaching.
    pub schedule: BetaSchedule,
    pub seed: u64,
    pub iterations: usize,
    pub steps_per_iteration: usize,
    /// Threshold on the per-step KL between teacher and learner.
    pub kl_epsilon: f64,
    pub world: WorldConfig,
    pub vehicle: VehicleConfig,
    pub sensor: SensorConfig,
    pub cost: TaskCost,
    pub mpc: MpcConfig,
    pub policy: PolicyConfig,
    pub commands: Option<CommandConfig>,
    pub evaluation: EvaluationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            method: Method::Plato,
            schedule: BetaSchedule::OneZero,
            seed: 0,
            iterations: 15,
            steps_per_iteration: 400,
            kl_epsilon: 2.0,
            world: WorldConfig::default(),
            vehicle: VehicleConfig::default(),
            sensor: SensorConfig::default(),
            cost: TaskCost::default(),
            mpc: MpcConfig::default(),
            policy: PolicyConfig::default(),
            commands: None,
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment config always serializes")
    }

    pub fn max_eval_steps(&self) -> usize {
        (self.evaluation.max_time / self.vehicle.dt).round() as usize
    }

    pub fn observation_dim(&self) -> usize {
        self.sensor.observation_dim(self.commands.is_some())
    }

    /// Checks every section; all failures are reported as config errors.
    pub fn validate(&self) -> Result<()> {
        let as_config = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        if self.steps_per_iteration == 0 {
            return Err(Error::Config("steps_per_iteration must be at least 1".into()));
        }
        if !(self.kl_epsilon > 0.0) {
            return Err(Error::Config("kl_epsilon must be positive".into()));
        }
        if self.evaluation.episodes == 0 || !(self.evaluation.max_time > 0.0) {
            return Err(Error::Config("evaluation needs at least one episode and positive max_time".into()));
        }
        if !(self.vehicle.radius > 0.0 && self.vehicle.actuator_noise >= 0.0) {
            return Err(Error::Config("vehicle radius must be positive and noise nonnegative".into()));
        }
        if let Some(c) = &self.commands {
            if !(c.lateral_range >= 0.0 && c.tolerance > 0.0) {
                return Err(Error::Config("commands need lateral_range >= 0 and tolerance > 0".into()));
            }
        }
        self.vehicle.model().map_err(as_config)?;
        self.world.validate()?;
        self.sensor.validate().map_err(as_config)?;
        self.cost.validate().map_err(as_config)?;
        self.mpc.validate().map_err(as_config)?;
        self.policy.validate().map_err(as_config)?;
        Ok(())
    }
}
