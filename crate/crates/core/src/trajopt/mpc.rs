//! Receding-horizon planning for the planar vehicle.

use nalgebra::{DMatrix, DVector};

use super::ilqg::{
    max_entropy_ilqg, Dynamics, LinearGaussianController, QuadraticCost, TrajectoryCost,
};
use super::MpcConfig;
use crate::env::{
    state_difference, ControlInput, ObstacleField, TaskCost, VehicleModel, VehicleState,
    CONTROL_DIM, STATE_DIM,
};
use crate::error::{Error, Result};
use crate::gaussian::{symmetrize, Gaussian};

/// What the planner knows about the world: the dynamics model, the task
/// cost and the obstacle field.
#[derive(Debug, Clone, Copy)]
pub struct MpcContext<'a> {
    pub model: &'a VehicleModel,
    pub cost: &'a TaskCost,
    pub field: &'a ObstacleField,
}

struct ActionPenalty {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    lambda: f64,
}

/// The vehicle planning problem as seen by [`max_entropy_ilqg`]. At the first
/// time step the cost may carry a quadratic pull toward a reference action.
pub struct VehicleProblem<'a> {
    context: MpcContext<'a>,
    fd_epsilon: f64,
    penalty: Option<ActionPenalty>,
}

fn state_of(x: &DVector<f64>) -> VehicleState {
    VehicleState::from_slice(x.as_slice()).unwrap_or_else(|_| {
        unreachable!("planner states always have {STATE_DIM} components")
    })
}

fn control_of(u: &DVector<f64>) -> ControlInput {
    ControlInput::from_slice(u.as_slice())
}

impl<'a> VehicleProblem<'a> {
    pub fn new(context: MpcContext<'a>, fd_epsilon: f64) -> Self {
        VehicleProblem {
            context,
            fd_epsilon,
            penalty: None,
        }
    }

    /// Adds `½λ(u − mean)ᵀ P (u − mean)` to the first stage.
    pub fn with_action_penalty(mut self, mean: DVector<f64>, precision: DMatrix<f64>, lambda: f64) -> Self {
        self.penalty = Some(ActionPenalty {
            mean,
            precision,
            lambda,
        });
        self
    }

    fn penalty_value(&self, t: usize, u: &DVector<f64>) -> f64 {
        match &self.penalty {
            Some(p) if t == 0 => {
                let d = u - &p.mean;
                0.5 * p.lambda * d.dot(&(&p.precision * &d))
            }
            _ => 0.0,
        }
    }
}

impl Dynamics for VehicleProblem<'_> {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn control_dim(&self) -> usize {
        CONTROL_DIM
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.context.model.propagate_vector(x, u)
    }

    fn linearize(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let (a, b, _) = self
            .context
            .model
            .linearize(&state_of(x), control_of(u), self.fd_epsilon);
        (a, b)
    }

    fn difference(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        state_difference(a, b)
    }

    fn clamp_control(&self, u: &mut DVector<f64>) {
        self.context.model.bounds.clamp_vector(u);
    }
}

impl TrajectoryCost for VehicleProblem<'_> {
    fn stage(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let c = self.context;
        c.cost.stage_cost(c.field, &state_of(x), control_of(u)) + self.penalty_value(t, u)
    }

    fn terminal(&self, x: &DVector<f64>) -> f64 {
        let c = self.context;
        c.cost.stage_cost(c.field, &state_of(x), c.cost.hover())
    }

    fn expand_stage(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> QuadraticCost {
        let c = self.context;
        let mut e = c.cost.expand(c.field, &state_of(x), control_of(u));
        if let Some(p) = self.penalty.as_ref().filter(|_| t == 0) {
            let d = u - &p.mean;
            e.value += self.penalty_value(t, u);
            e.lu += &p.precision * d * p.lambda;
            e.luu += &p.precision * p.lambda;
        }
        e
    }

    fn expand_terminal(&self, x: &DVector<f64>) -> QuadraticCost {
        let c = self.context;
        let e = c.cost.expand(c.field, &state_of(x), c.cost.hover());
        QuadraticCost::state_only(e.value, e.lx, e.lxx)
    }
}

/// First-step action distribution of a receding-horizon solve, with the full
/// controller for warm-starting the next one.
#[derive(Debug, Clone)]
pub struct MpcPlan {
    pub action: Gaussian,
    pub controller: LinearGaussianController,
    pub iterations: usize,
}

impl MpcPlan {
    /// Precision of the first-step action, used to weight supervision labels.
    pub fn label_precision(&self) -> Result<DMatrix<f64>> {
        self.action.precision()
    }
}

fn plan(
    problem: &VehicleProblem<'_>,
    x: &VehicleState,
    config: &MpcConfig,
    warm_start: Option<&LinearGaussianController>,
    covariance_scale: f64,
) -> Result<MpcPlan> {
    if !x.is_finite() {
        return Err(Error::SimulationDiverged {
            state: x.to_vector().as_slice().to_vec(),
        });
    }
    let solution = max_entropy_ilqg(problem, problem, &x.to_vector(), config, warm_start)?;
    let mut controller = solution.controller;
    if covariance_scale != 1.0 {
        let scaled = symmetrize(&(controller.covariance(0) * covariance_scale));
        controller.set_covariance(0, scaled);
    }
    let action = Gaussian::new(
        controller.nominal_controls()[0].clone(),
        controller.covariance(0).clone(),
    )?;
    Ok(MpcPlan {
        action,
        controller,
        iterations: solution.iterations,
    })
}

/// The locally optimal controller `π*(u|x)`: maximum-entropy iLQG on the task
/// cost alone.
pub fn mpc_star_plan(
    context: MpcContext<'_>,
    x: &VehicleState,
    config: &MpcConfig,
    warm_start: Option<&LinearGaussianController>,
) -> Result<MpcPlan> {
    config.validate()?;
    let problem = VehicleProblem::new(context, config.fd_epsilon);
    plan(&problem, x, config, warm_start, 1.0)
}

/// The adaptive teacher `π_λ(u|x, θ)`: trades the task cost against
/// `λ·KL(π_λ ‖ π_θ)` at the current step, where `learner` is the learner's
/// action distribution at the current observation.
///
/// The KL term contributes `½λ(u − μ_θ)ᵀΣ_θ⁻¹(u − μ_θ)` to the first stage
/// and raises the entropy weight there from `τ` to `τ + λ`, so the first-step
/// covariance is `(τ + λ)(Q_uu + λΣ_θ⁻¹)⁻¹`. With `λ = 0` this is exactly
/// [`mpc_star_plan`].
pub fn mpc_teacher_plan(
    context: MpcContext<'_>,
    x: &VehicleState,
    learner: &Gaussian,
    config: &MpcConfig,
    warm_start: Option<&LinearGaussianController>,
) -> Result<MpcPlan> {
    config.validate()?;
    if config.lambda == 0.0 {
        return mpc_star_plan(context, x, config, warm_start);
    }
    if learner.dim() != CONTROL_DIM {
        return Err(Error::DimensionMismatch {
            context: "mpc_teacher_plan: learner action",
            expected: CONTROL_DIM,
            found: learner.dim(),
        });
    }
    let problem = VehicleProblem::new(context, config.fd_epsilon).with_action_penalty(
        learner.mean().clone(),
        learner.precision()?,
        config.lambda,
    );
    let scale = (config.temperature + config.lambda) / config.temperature;
    plan(&problem, x, config, warm_start, scale)
}
