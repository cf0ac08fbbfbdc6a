use nalgebra::Vector2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::vehicle::VehicleState;
use super::world::{raycast_laser, ObstacleField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationMode {
    /// Laser fan plus heading and velocities; position is never observed.
    #[default]
    Laser,
    /// The full vehicle state, no perception.
    FullState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub mode: ObservationMode,
    pub beams: usize,
    pub fan_angle: f64,
    pub max_range: f64,
    /// Standard deviation of laser noise (m).
    pub laser_noise: f64,
    /// Standard deviation of noise on heading and velocity channels.
    pub state_noise: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            mode: ObservationMode::Laser,
            beams: 15,
            fan_angle: std::f64::consts::PI,
            max_range: 10.0,
            laser_noise: 0.1,
            state_noise: 0.01,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode == ObservationMode::Laser && self.beams == 0 {
            return Err(Error::InvalidParameter("at least one laser beam is required".into()));
        }
        if !(self.max_range > 0.0 && self.laser_noise >= 0.0 && self.state_noise >= 0.0) {
            return Err(Error::InvalidParameter(format!("invalid sensor config {self:?}")));
        }
        Ok(())
    }

    /// Length of [`Observation::to_vector`] for this configuration.
    pub fn observation_dim(&self, with_command: bool) -> usize {
        let base = match self.mode {
            ObservationMode::Laser => self.beams + 4,
            ObservationMode::FullState => 6,
        };
        base + if with_command { 2 } else { 0 }
    }
}

/// What the learner sees.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Each range in `[0, max_range]`; empty in full-state mode.
    pub laser_ranges: Vec<f64>,
    /// Present only in full-state mode.
    pub position: Option<Vector2<f64>>,
    pub heading: f64,
    pub linear_velocity: Vector2<f64>,
    pub angular_velocity: f64,
    pub commanded_velocity: Option<Vector2<f64>>,
}

impl Observation {
    /// Flattened layout: `[ranges.., (px, py)?, vx, vy, ω, heading, (cx, cy)?]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = self.laser_ranges.clone();
        if let Some(p) = self.position {
            v.extend([p.x, p.y]);
        }
        v.extend([
            self.linear_velocity.x,
            self.linear_velocity.y,
            self.angular_velocity,
            self.heading,
        ]);
        if let Some(c) = self.commanded_velocity {
            v.extend([c.x, c.y]);
        }
        v
    }
}

/// Simulates the sensors with additive Gaussian noise.
pub fn observe<R: Rng + ?Sized>(
    field: &ObstacleField,
    x: &VehicleState,
    config: &SensorConfig,
    command: Option<Vector2<f64>>,
    rng: &mut R,
) -> Observation {
    let mut noise = |scale: f64| {
        if scale > 0.0 {
            scale * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        }
    };
    let (laser_ranges, position) = match config.mode {
        ObservationMode::Laser => {
            let ranges = raycast_laser(field, x, config.beams, config.fan_angle, config.max_range)
                .into_iter()
                .map(|r| (r + noise(config.laser_noise)).clamp(0.0, config.max_range))
                .collect();
            (ranges, None)
        }
        ObservationMode::FullState => {
            let p = x.position + Vector2::new(noise(config.state_noise), noise(config.state_noise));
            (Vec::new(), Some(p))
        }
    };
    Observation {
        laser_ranges,
        position,
        heading: x.heading + noise(config.state_noise),
        linear_velocity: x.velocity
            + Vector2::new(noise(config.state_noise), noise(config.state_noise)),
        angular_velocity: x.angular_velocity + noise(config.state_noise),
        commanded_velocity: command,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::world::Circle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ranges_stay_in_bounds_under_noise() {
        let field = ObstacleField::from_circles(vec![Circle {
            center: Vector2::new(0.6, 0.0),
            radius: 0.5,
        }]);
        let config = SensorConfig {
            laser_noise: 2.0,
            ..SensorConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let o = observe(&field, &VehicleState::at_rest(Vector2::zeros(), 0.0), &config, None, &mut rng);
            assert!(o.laser_ranges.iter().all(|r| (0.0..=config.max_range).contains(r)));
        }
    }

    #[test]
    fn dimensions_match_config() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = VehicleState::at_rest(Vector2::zeros(), 0.0);
        for mode in [ObservationMode::Laser, ObservationMode::FullState] {
            let config = SensorConfig {
                mode,
                ..SensorConfig::default()
            };
            let cmd = Some(Vector2::new(1.0, 0.5));
            let o = observe(&ObstacleField::empty(), &x, &config, cmd, &mut rng);
            assert_eq!(o.to_vector().len(), config.observation_dim(true));
            let o = observe(&ObstacleField::empty(), &x, &config, None, &mut rng);
            assert_eq!(o.to_vector().len(), config.observation_dim(false));
        }
    }
}
