//! Trajectory optimization: maximum-entropy iLQG and the two receding-horizon
//! controllers built on it, the KL-penalized teacher `π_λ` and the locally
//! optimal supervisor `π*`.

mod ilqg;
mod mpc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ilqg::{
    expand_along, max_entropy_ilqg, Dynamics, IlqgSolution, LinearGaussianController,
    QuadraticCost, QuadraticCostModel, TrajectoryCost,
};
pub use mpc::{mpc_star_plan, mpc_teacher_plan, MpcContext, MpcPlan, VehicleProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Weight of the KL term pulling the teacher toward the learner.
    pub lambda: f64,
    pub temperature: f64,
    pub regularization_min: f64,
    pub regularization_max: f64,
    pub regularization_factor: f64,
    pub line_search_shrink: f64,
    pub line_search_trials: usize,
    pub fd_epsilon: f64,
    pub max_iterations: usize,
    /// Relative cost improvement below which iLQG stops.
    pub tolerance: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 15,
            lambda: 0.0,
            temperature: 1.0,
            regularization_min: 1e-6,
            regularization_max: 1e6,
            regularization_factor: 10.0,
            line_search_shrink: 0.5,
            line_search_trials: 10,
            fd_epsilon: 1e-6,
            max_iterations: 10,
            tolerance: 1e-6,
        }
    }
}

impl MpcConfig {
    pub fn with_lambda(self, lambda: f64) -> Self {
        MpcConfig { lambda, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.temperature,
            self.regularization_min,
            self.regularization_max,
            self.fd_epsilon,
            self.tolerance,
        ];
        if self.horizon == 0 || self.max_iterations == 0 || self.line_search_trials == 0 {
            return Err(Error::InvalidParameter(
                "horizon, max_iterations and line_search_trials must be at least 1".into(),
            ));
        }
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "MPC tolerances and bounds must be positive: {self:?}"
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.regularization_factor > 1.0) || self.regularization_min > self.regularization_max {
            return Err(Error::InvalidParameter(
                "regularization schedule must grow from min to max".into(),
            ));
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(Error::InvalidParameter("line_search_shrink must lie in (0, 1)".into()));
        }
        Ok(())
    }
}
