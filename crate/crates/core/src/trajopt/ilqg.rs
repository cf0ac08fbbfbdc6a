//! Maximum-entropy iLQG over generic dynamics and costs.
//!
//! Each iteration rolls out the nominal trajectory, linearizes the dynamics
//! and expands the cost to second order along it, runs a regularized LQR
//! backward pass, and accepts a backtracking line-search step on the
//! feedforward terms. The returned controller is the time-varying
//! linear-Gaussian policy `N(K_t x + k_t, Σ_t)` with `Σ_t = τ Q_uu⁻¹`.

use nalgebra::{DMatrix, DVector};

use super::MpcConfig;
use crate::error::{Error, Result};
use crate::gaussian::{symmetrize, Gaussian};

/// A discrete-time step map and its linearization.
pub trait Dynamics {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    /// `(A, B)` with `f(x ⊕ δx, u + δu) ≈ f(x, u) + A δx + B δu`.
    fn linearize(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>);
    /// `a ⊖ b` in the tangent space of the state.
    fn difference(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        a - b
    }
    /// Projects a control onto the feasible set.
    fn clamp_control(&self, _u: &mut DVector<f64>) {}
}

/// Second-order expansion of one stage of the cost.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    pub value: f64,
    pub lx: DVector<f64>,
    pub lu: DVector<f64>,
    pub lxx: DMatrix<f64>,
    pub luu: DMatrix<f64>,
    pub lux: DMatrix<f64>,
}

impl QuadraticCost {
    /// Expansion with no control dependence (terminal stage).
    pub fn state_only(value: f64, lx: DVector<f64>, lxx: DMatrix<f64>) -> Self {
        let n = lx.len();
        QuadraticCost {
            value,
            lx,
            lu: DVector::zeros(0),
            lxx,
            luu: DMatrix::zeros(0, 0),
            lux: DMatrix::zeros(0, n),
        }
    }
}

/// The cost expanded along a whole nominal trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCostModel {
    pub stages: Vec<QuadraticCost>,
    pub terminal: QuadraticCost,
}

/// Finite-horizon cost `Σ_t ℓ_t(x_t, u_t) + ℓ_H(x_H)`.
pub trait TrajectoryCost {
    fn stage(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64;
    fn terminal(&self, x: &DVector<f64>) -> f64;
    fn expand_stage(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> QuadraticCost;
    fn expand_terminal(&self, x: &DVector<f64>) -> QuadraticCost;
}

/// Time-varying linear-Gaussian controller `N(K_t x + k_t, Σ_t)`, stored
/// about its nominal trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianController {
    nominal_states: Vec<DVector<f64>>,
    nominal_controls: Vec<DVector<f64>>,
    gains: Vec<DMatrix<f64>>,
    covariances: Vec<DMatrix<f64>>,
    cost: f64,
}

impl LinearGaussianController {
    pub fn horizon(&self) -> usize {
        self.gains.len()
    }

    pub fn gain(&self, t: usize) -> &DMatrix<f64> {
        &self.gains[t]
    }

    /// `k_t` such that the mean action is `K_t x + k_t`.
    pub fn offset(&self, t: usize) -> DVector<f64> {
        &self.nominal_controls[t] - &self.gains[t] * &self.nominal_states[t]
    }

    pub fn covariance(&self, t: usize) -> &DMatrix<f64> {
        &self.covariances[t]
    }

    pub fn nominal_states(&self) -> &[DVector<f64>] {
        &self.nominal_states
    }

    pub fn nominal_controls(&self) -> &[DVector<f64>] {
        &self.nominal_controls
    }

    /// Cost of the nominal (mean) trajectory.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// `K_t x + k_t`.
    pub fn mean_action(&self, t: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.gains[t] * x + self.offset(t)
    }

    /// Mean action using the dynamics' state difference, which keeps angular
    /// components consistent across wrap-around.
    pub fn mean_action_with<D: Dynamics + ?Sized>(
        &self,
        dynamics: &D,
        t: usize,
        x: &DVector<f64>,
    ) -> DVector<f64> {
        &self.nominal_controls[t] + &self.gains[t] * dynamics.difference(x, &self.nominal_states[t])
    }

    pub fn action_distribution(&self, t: usize, x: &DVector<f64>) -> Result<Gaussian> {
        Gaussian::new(self.mean_action(t, x), self.covariances[t].clone())
    }

    pub(crate) fn set_covariance(&mut self, t: usize, covariance: DMatrix<f64>) {
        self.covariances[t] = covariance;
    }

    /// Drops the first step and repeats the last, for warm-starting the next
    /// receding-horizon solve.
    pub fn shifted(&self) -> LinearGaussianController {
        fn shift<T: Clone>(v: &[T]) -> Vec<T> {
            let mut out: Vec<T> = v[1..].to_vec();
            out.push(v[v.len() - 1].clone());
            out
        }
        LinearGaussianController {
            nominal_states: shift(&self.nominal_states),
            nominal_controls: shift(&self.nominal_controls),
            gains: shift(&self.gains),
            covariances: shift(&self.covariances),
            cost: self.cost,
        }
    }
}

/// Result of a [`max_entropy_ilqg`] solve.
#[derive(Debug, Clone)]
pub struct IlqgSolution {
    pub controller: LinearGaussianController,
    /// Hessian of the quadratic cost-to-go at each time step, `0..=H`.
    pub value_hessians: Vec<DMatrix<f64>>,
    /// Regularized control Hessian `Q_uu` at each time step.
    pub control_hessians: Vec<DMatrix<f64>>,
    /// Cost of the initial (warm-start) trajectory.
    pub initial_cost: f64,
    pub iterations: usize,
}

struct Trajectory {
    states: Vec<DVector<f64>>,
    controls: Vec<DVector<f64>>,
    cost: f64,
}

struct BackwardPass {
    gains: Vec<DMatrix<f64>>,
    feedforward: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    control_hessians: Vec<DMatrix<f64>>,
    value_hessians: Vec<DMatrix<f64>>,
}

fn trajectory_is_finite(states: &[DVector<f64>], cost: f64) -> bool {
    cost.is_finite() && states.iter().all(|x| x.iter().all(|v| v.is_finite()))
}

fn rollout<D, C>(
    dynamics: &D,
    cost: &C,
    x0: &DVector<f64>,
    reference: Option<(&Trajectory, &BackwardPass, f64)>,
    controls: &[DVector<f64>],
) -> Trajectory
where
    D: Dynamics + ?Sized,
    C: TrajectoryCost + ?Sized,
{
    let horizon = controls.len();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut new_controls = Vec::with_capacity(horizon);
    let mut x = x0.clone();
    let mut total = 0.0;
    for t in 0..horizon {
        let mut u = match reference {
            Some((nominal, pass, alpha)) => {
                let dx = dynamics.difference(&x, &nominal.states[t]);
                &nominal.controls[t] + &pass.feedforward[t] * alpha + &pass.gains[t] * dx
            }
            None => controls[t].clone(),
        };
        dynamics.clamp_control(&mut u);
        total += cost.stage(t, &x, &u);
        let next = dynamics.step(&x, &u);
        states.push(x);
        new_controls.push(u);
        x = next;
    }
    total += cost.terminal(&x);
    states.push(x);
    Trajectory {
        states,
        controls: new_controls,
        cost: total,
    }
}

fn warm_start_rollout<D, C>(
    dynamics: &D,
    cost: &C,
    x0: &DVector<f64>,
    warm: &LinearGaussianController,
) -> Trajectory
where
    D: Dynamics + ?Sized,
    C: TrajectoryCost + ?Sized,
{
    let horizon = warm.horizon();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut controls = Vec::with_capacity(horizon);
    let mut x = x0.clone();
    let mut total = 0.0;
    for t in 0..horizon {
        let mut u = warm.mean_action_with(dynamics, t, &x);
        dynamics.clamp_control(&mut u);
        total += cost.stage(t, &x, &u);
        let next = dynamics.step(&x, &u);
        states.push(x);
        controls.push(u);
        x = next;
    }
    total += cost.terminal(&x);
    states.push(x);
    Trajectory {
        states,
        controls,
        cost: total,
    }
}

/// Linearizes the dynamics and expands the cost along a trajectory.
pub fn expand_along<D, C>(
    dynamics: &D,
    cost: &C,
    states: &[DVector<f64>],
    controls: &[DVector<f64>],
) -> (Vec<(DMatrix<f64>, DMatrix<f64>)>, QuadraticCostModel)
where
    D: Dynamics + ?Sized,
    C: TrajectoryCost + ?Sized,
{
    let jacobians = controls
        .iter()
        .zip(states)
        .map(|(u, x)| dynamics.linearize(x, u))
        .collect();
    let stages = controls
        .iter()
        .zip(states)
        .enumerate()
        .map(|(t, (u, x))| cost.expand_stage(t, x, u))
        .collect();
    let terminal = cost.expand_terminal(&states[controls.len()]);
    (jacobians, QuadraticCostModel { stages, terminal })
}

fn backward_pass(
    jacobians: &[(DMatrix<f64>, DMatrix<f64>)],
    model: &QuadraticCostModel,
    regularization: f64,
    temperature: f64,
) -> Option<BackwardPass> {
    let horizon = jacobians.len();
    let mut vx = model.terminal.lx.clone();
    let mut vxx = model.terminal.lxx.clone();
    let mut gains = vec![DMatrix::zeros(0, 0); horizon];
    let mut feedforward = vec![DVector::zeros(0); horizon];
    let mut covariances = vec![DMatrix::zeros(0, 0); horizon];
    let mut control_hessians = vec![DMatrix::zeros(0, 0); horizon];
    let mut value_hessians = vec![DMatrix::zeros(0, 0); horizon + 1];
    value_hessians[horizon] = vxx.clone();

    for t in (0..horizon).rev() {
        let (a, b) = &jacobians[t];
        let stage = &model.stages[t];
        let at = a.transpose();
        let bt = b.transpose();
        let vxx_a = &vxx * a;
        let qx = &stage.lx + &at * &vx;
        let qu = &stage.lu + &bt * &vx;
        let qxx = &stage.lxx + &at * &vxx_a;
        let qux = &stage.lux + &bt * &vxx_a;
        let mut quu = &stage.luu + &bt * &vxx * b;
        quu = symmetrize(&quu);
        let m = quu.nrows();
        let quu_reg = &quu + DMatrix::identity(m, m) * regularization;
        let chol = quu_reg.clone().cholesky()?;

        let k = -chol.solve(&qu);
        let gain = -chol.solve(&qux);
        let kt = gain.transpose();
        vx = &qx + &kt * &quu * &k + &kt * &qu + qux.transpose() * &k;
        vxx = symmetrize(&(&qxx + &kt * &quu * &gain + &kt * &qux + qux.transpose() * &gain));

        covariances[t] = symmetrize(&(chol.inverse() * temperature));
        control_hessians[t] = quu_reg;
        gains[t] = gain;
        feedforward[t] = k;
        value_hessians[t] = vxx.clone();
    }
    Some(BackwardPass {
        gains,
        feedforward,
        covariances,
        control_hessians,
        value_hessians,
    })
}

fn next_regularization(current: f64, config: &MpcConfig) -> f64 {
    (current * config.regularization_factor).max(config.regularization_min)
}

/// Runs the backward pass, raising the Levenberg–Marquardt term until
/// `Q_uu` is positive definite everywhere.
fn regularized_backward_pass(
    jacobians: &[(DMatrix<f64>, DMatrix<f64>)],
    model: &QuadraticCostModel,
    regularization: &mut f64,
    config: &MpcConfig,
) -> Result<BackwardPass> {
    loop {
        if let Some(pass) = backward_pass(jacobians, model, *regularization, config.temperature) {
            return Ok(pass);
        }
        *regularization = next_regularization(*regularization, config);
        if *regularization > config.regularization_max {
            return Err(Error::OptimizationFailed(format!(
                "Q_uu not positive definite with regularization up to {:e}",
                config.regularization_max
            )));
        }
    }
}

/// Maximum-entropy iLQG from `x0`. Without a warm start the initial controls
/// are zero. The returned controller's nominal cost never exceeds the warm
/// start's.
pub fn max_entropy_ilqg<D, C>(
    dynamics: &D,
    cost: &C,
    x0: &DVector<f64>,
    config: &MpcConfig,
    warm_start: Option<&LinearGaussianController>,
) -> Result<IlqgSolution>
where
    D: Dynamics + ?Sized,
    C: TrajectoryCost + ?Sized,
{
    config.validate()?;
    let horizon = config.horizon;
    if x0.len() != dynamics.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "max_entropy_ilqg: x0",
            expected: dynamics.state_dim(),
            found: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::SimulationDiverged {
            state: x0.as_slice().to_vec(),
        });
    }

    let mut nominal = match warm_start {
        Some(warm) if warm.horizon() == horizon => warm_start_rollout(dynamics, cost, x0, warm),
        _ => {
            let zeros = vec![DVector::zeros(dynamics.control_dim()); horizon];
            rollout(dynamics, cost, x0, None, &zeros)
        }
    };
    if !trajectory_is_finite(&nominal.states, nominal.cost) {
        return Err(Error::SimulationDiverged {
            state: nominal
                .states
                .iter()
                .find(|x| x.iter().any(|v| !v.is_finite()))
                .unwrap_or(&nominal.states[horizon])
                .as_slice()
                .to_vec(),
        });
    }
    let initial_cost = nominal.cost;

    let mut regularization = 0.0;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let (jacobians, model) = expand_along(dynamics, cost, &nominal.states, &nominal.controls);
        let pass = regularized_backward_pass(&jacobians, &model, &mut regularization, config)?;

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..config.line_search_trials {
            let candidate = rollout(
                dynamics,
                cost,
                x0,
                Some((&nominal, &pass, alpha)),
                &nominal.controls,
            );
            if trajectory_is_finite(&candidate.states, candidate.cost) && candidate.cost < nominal.cost {
                accepted = Some(candidate);
                break;
            }
            alpha *= config.line_search_shrink;
        }
        let Some(candidate) = accepted else {
            break;
        };
        let improvement = nominal.cost - candidate.cost;
        let scale = nominal.cost.abs().max(f64::MIN_POSITIVE);
        nominal = candidate;
        regularization /= config.regularization_factor;
        if regularization < config.regularization_min {
            regularization = 0.0;
        }
        if improvement / scale < config.tolerance {
            break;
        }
    }

    // Gains and covariances are those of the LQR problem around the final
    // nominal trajectory.
    let (jacobians, model) = expand_along(dynamics, cost, &nominal.states, &nominal.controls);
    let pass = regularized_backward_pass(&jacobians, &model, &mut regularization, config)?;
    Ok(IlqgSolution {
        controller: LinearGaussianController {
            nominal_states: nominal.states,
            nominal_controls: nominal.controls,
            gains: pass.gains,
            covariances: pass.covariances,
            cost: nominal.cost,
        },
        value_hessians: pass.value_hessians,
        control_hessians: pass.control_hessians,
        initial_cost,
        iterations,
    })
}
