//! Navigation cost: track a velocity and heading with little rotation and
//! control effort while staying at least `d_safe` away from obstacles.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use super::vehicle::{index, wrap_angle, ControlInput, VehicleState, CONTROL_DIM, STATE_DIM};
use super::world::ObstacleField;
use crate::error::{Error, Result};
use crate::trajopt::QuadraticCost;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskCost {
    pub target_velocity: [f64; 2],
    pub target_heading: f64,
    pub weight_velocity: f64,
    pub weight_heading: f64,
    pub weight_angular_velocity: f64,
    pub weight_control: f64,
    pub weight_obstacle: f64,
    pub d_safe: f64,
    pub hover_control: [f64; 2],
    /// Scale `s` of the squashed cost `1 - exp(-L / s)`.
    pub normalization_scale: f64,
}

impl Default for TaskCost {
    fn default() -> Self {
        TaskCost {
            target_velocity: [1.5, 0.0],
            target_heading: 0.0,
            weight_velocity: 1e3,
            weight_heading: 1e4,
            weight_angular_velocity: 250.0,
            weight_control: 5f64.powi(-3),
            weight_obstacle: 1e3,
            d_safe: 0.75,
            hover_control: [0.0, 0.0],
            normalization_scale: 1e3,
        }
    }
}

/// Individual contributions to the stage cost.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostTerms {
    pub velocity: f64,
    pub heading: f64,
    pub angular_velocity: f64,
    pub control: f64,
    pub obstacle: f64,
}

impl CostTerms {
    pub fn total(&self) -> f64 {
        self.velocity + self.heading + self.angular_velocity + self.control + self.obstacle
    }
}

impl TaskCost {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            self.weight_velocity,
            self.weight_heading,
            self.weight_angular_velocity,
            self.weight_control,
            self.weight_obstacle,
        ];
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("cost weights must be nonnegative".into()));
        }
        if !(self.d_safe > 0.0) || !(self.normalization_scale > 0.0) {
            return Err(Error::InvalidParameter(
                "d_safe and normalization_scale must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn target_velocity(&self) -> Vector2<f64> {
        Vector2::from(self.target_velocity)
    }

    pub fn hover(&self) -> ControlInput {
        ControlInput::new(self.hover_control[0], self.hover_control[1])
    }

    pub fn terms(&self, field: &ObstacleField, x: &VehicleState, u: ControlInput) -> CostTerms {
        let dv = x.velocity - self.target_velocity();
        let dh = wrap_angle(x.heading - self.target_heading);
        let du = [u.thrust - self.hover_control[0], u.torque - self.hover_control[1]];
        let sd = field.signed_distance(x.position);
        CostTerms {
            velocity: self.weight_velocity * dv.norm_squared(),
            heading: self.weight_heading * dh * dh,
            angular_velocity: self.weight_angular_velocity * x.angular_velocity * x.angular_velocity,
            control: self.weight_control * (du[0] * du[0] + du[1] * du[1]),
            obstacle: self.weight_obstacle * (self.d_safe - sd).max(0.0),
        }
    }

    /// `L(x, u)`, always nonnegative.
    pub fn stage_cost(&self, field: &ObstacleField, x: &VehicleState, u: ControlInput) -> f64 {
        self.terms(field, x, u).total()
    }

    /// Squashed cost in `[0, 1]`.
    pub fn normalized_cost(&self, field: &ObstacleField, x: &VehicleState, u: ControlInput) -> f64 {
        1.0 - (-self.stage_cost(field, x, u) / self.normalization_scale).exp()
    }

    /// Gauss-Newton expansion around `(x, u)`. The obstacle hinge contributes
    /// only to the gradient.
    pub fn expand(&self, field: &ObstacleField, x: &VehicleState, u: ControlInput) -> QuadraticCost {
        let mut lx = DVector::zeros(STATE_DIM);
        let mut lxx = DMatrix::zeros(STATE_DIM, STATE_DIM);
        let dv = x.velocity - self.target_velocity();
        let dh = wrap_angle(x.heading - self.target_heading);

        lx[index::VX] = 2.0 * self.weight_velocity * dv.x;
        lx[index::VY] = 2.0 * self.weight_velocity * dv.y;
        lxx[(index::VX, index::VX)] = 2.0 * self.weight_velocity;
        lxx[(index::VY, index::VY)] = 2.0 * self.weight_velocity;
        lx[index::HEADING] = 2.0 * self.weight_heading * dh;
        lxx[(index::HEADING, index::HEADING)] = 2.0 * self.weight_heading;
        lx[index::OMEGA] = 2.0 * self.weight_angular_velocity * x.angular_velocity;
        lxx[(index::OMEGA, index::OMEGA)] = 2.0 * self.weight_angular_velocity;

        let (sd, grad) = field.signed_distance_with_gradient(x.position);
        if sd < self.d_safe {
            lx[index::PX] -= self.weight_obstacle * grad.x;
            lx[index::PY] -= self.weight_obstacle * grad.y;
        }

        let lu = DVector::from_row_slice(&[
            2.0 * self.weight_control * (u.thrust - self.hover_control[0]),
            2.0 * self.weight_control * (u.torque - self.hover_control[1]),
        ]);
        let luu = DMatrix::identity(CONTROL_DIM, CONTROL_DIM) * (2.0 * self.weight_control);
        QuadraticCost {
            value: self.stage_cost(field, x, u),
            lx,
            lu,
            lxx,
            luu,
            lux: DMatrix::zeros(CONTROL_DIM, STATE_DIM),
        }
    }
}
