//! Planar rigid-body vehicle: forward thrust along the heading plus a turning
//! torque, integrated with semi-implicit Euler.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STATE_DIM: usize = 6;
pub const CONTROL_DIM: usize = 2;

/// Layout of [`VehicleState::to_vector`].
pub mod index {
    pub const PX: usize = 0;
    pub const PY: usize = 1;
    pub const HEADING: usize = 2;
    pub const VX: usize = 3;
    pub const VY: usize = 4;
    pub const OMEGA: usize = 5;
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub position: Vector2<f64>,
    /// Radians in `(-π, π]`.
    pub heading: f64,
    pub velocity: Vector2<f64>,
    pub angular_velocity: f64,
}

impl VehicleState {
    pub fn at_rest(position: Vector2<f64>, heading: f64) -> Self {
        VehicleState {
            position,
            heading: wrap_angle(heading),
            velocity: Vector2::zeros(),
            angular_velocity: 0.0,
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&[
            self.position.x,
            self.position.y,
            self.heading,
            self.velocity.x,
            self.velocity.y,
            self.angular_velocity,
        ])
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != STATE_DIM {
            return Err(Error::DimensionMismatch {
                context: "VehicleState::from_slice",
                expected: STATE_DIM,
                found: v.len(),
            });
        }
        Ok(VehicleState {
            position: Vector2::new(v[0], v[1]),
            heading: wrap_angle(v[2]),
            velocity: Vector2::new(v[3], v[4]),
            angular_velocity: v[5],
        })
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).all(|v| v.is_finite())
            && self.heading.is_finite()
            && self.angular_velocity.is_finite()
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

/// Difference `a ⊖ b` of two state vectors with the heading component wrapped.
pub fn state_difference(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut d = a - b;
    d[index::HEADING] = wrap_angle(d[index::HEADING]);
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    /// Forward acceleration along the heading (m/s²).
    pub thrust: f64,
    /// Angular acceleration (rad/s²).
    pub torque: f64,
}

impl ControlInput {
    pub fn new(thrust: f64, torque: f64) -> Self {
        ControlInput { thrust, torque }
    }

    pub fn from_slice(u: &[f64]) -> Self {
        ControlInput {
            thrust: u[0],
            torque: u[1],
        }
    }

    pub fn to_vector(self) -> DVector<f64> {
        DVector::from_row_slice(&[self.thrust, self.torque])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBounds {
    pub thrust: [f64; 2],
    pub torque: [f64; 2],
}

impl Default for ControlBounds {
    fn default() -> Self {
        ControlBounds {
            thrust: [-4.0, 4.0],
            torque: [-12.0, 12.0],
        }
    }
}

impl ControlBounds {
    pub fn clamp(&self, u: ControlInput) -> ControlInput {
        ControlInput {
            thrust: u.thrust.clamp(self.thrust[0], self.thrust[1]),
            torque: u.torque.clamp(self.torque[0], self.torque[1]),
        }
    }

    pub fn clamp_vector(&self, u: &mut DVector<f64>) {
        u[0] = u[0].clamp(self.thrust[0], self.thrust[1]);
        u[1] = u[1].clamp(self.torque[0], self.torque[1]);
    }

    pub fn contains(&self, u: ControlInput) -> bool {
        (self.thrust[0]..=self.thrust[1]).contains(&u.thrust)
            && (self.torque[0]..=self.torque[1]).contains(&u.torque)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.thrust[0] < self.thrust[1] && self.torque[0] < self.torque[1]) {
            return Err(Error::InvalidParameter(format!(
                "control bounds must satisfy min < max: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Time step and actuator limits of the planar vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleModel {
    pub dt: f64,
    pub bounds: ControlBounds,
}

impl VehicleModel {
    pub fn new(dt: f64, bounds: ControlBounds) -> Result<Self> {
        if !(dt > 0.0 && dt <= 0.1) {
            return Err(Error::InvalidParameter(format!("dt must lie in (0, 0.1], got {dt}")));
        }
        bounds.validate()?;
        Ok(VehicleModel { dt, bounds })
    }

    /// Noise-free, unclamped step map.
    pub fn propagate(&self, x: &VehicleState, u: ControlInput) -> VehicleState {
        let dt = self.dt;
        let (s, c) = x.heading.sin_cos();
        let angular_velocity = x.angular_velocity + dt * u.torque;
        let velocity = x.velocity + Vector2::new(c, s) * (dt * u.thrust);
        VehicleState {
            position: x.position + velocity * dt,
            heading: wrap_angle(x.heading + dt * angular_velocity),
            velocity,
            angular_velocity,
        }
    }

    /// Clamps `u` to the actuator box, adds `N(0, noise_scale² I)` actuator
    /// noise, and integrates one step.
    pub fn step<R: Rng + ?Sized>(
        &self,
        x: &VehicleState,
        u: ControlInput,
        noise_scale: f64,
        rng: &mut R,
    ) -> Result<VehicleState> {
        if !x.is_finite() {
            return Err(Error::SimulationDiverged {
                state: x.to_vector().as_slice().to_vec(),
            });
        }
        let mut u = self.bounds.clamp(u);
        if noise_scale > 0.0 {
            u.thrust += noise_scale * rng.sample::<f64, _>(StandardNormal);
            u.torque += noise_scale * rng.sample::<f64, _>(StandardNormal);
        }
        let next = self.propagate(x, u);
        if !next.is_finite() {
            return Err(Error::SimulationDiverged {
                state: next.to_vector().as_slice().to_vec(),
            });
        }
        Ok(next)
    }

    pub(crate) fn propagate_vector(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let state = VehicleState {
            position: Vector2::new(x[0], x[1]),
            heading: x[2],
            velocity: Vector2::new(x[3], x[4]),
            angular_velocity: x[5],
        };
        self.propagate(&state, ControlInput::from_slice(u.as_slice()))
            .to_vector()
    }

    /// Central finite-difference linearization of [`propagate`](Self::propagate):
    /// `f(x ⊕ δx, u + δu) ≈ f(x, u) + A δx + B δu`. Returns `(A, B, f(x, u))`.
    pub fn linearize(
        &self,
        x: &VehicleState,
        u: ControlInput,
        eps: f64,
    ) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let xv = x.to_vector();
        let uv = u.to_vector();
        let c = self.propagate_vector(&xv, &uv);
        let mut a = DMatrix::zeros(STATE_DIM, STATE_DIM);
        for i in 0..STATE_DIM {
            let mut plus = xv.clone();
            let mut minus = xv.clone();
            plus[i] += eps;
            minus[i] -= eps;
            let d = state_difference(
                &self.propagate_vector(&plus, &uv),
                &self.propagate_vector(&minus, &uv),
            ) / (2.0 * eps);
            a.set_column(i, &d);
        }
        let mut b = DMatrix::zeros(STATE_DIM, CONTROL_DIM);
        for j in 0..CONTROL_DIM {
            let mut plus = uv.clone();
            let mut minus = uv.clone();
            plus[j] += eps;
            minus[j] -= eps;
            let d = state_difference(
                &self.propagate_vector(&xv, &plus),
                &self.propagate_vector(&xv, &minus),
            ) / (2.0 * eps);
            b.set_column(j, &d);
        }
        (a, b, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> VehicleModel {
        VehicleModel::new(0.05, ControlBounds::default()).unwrap()
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn rest_with_hover_is_an_equilibrium() {
        let m = model();
        let x = VehicleState::at_rest(Vector2::new(1.0, -2.0), 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let next = m.step(&x, ControlInput::default(), 0.0, &mut rng).unwrap();
        assert_eq!(next, x);
    }

    #[test]
    fn thrust_increases_speed_by_a_dt() {
        let m = model();
        let x = VehicleState::at_rest(Vector2::zeros(), 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let next = m.step(&x, ControlInput::new(2.5, 0.0), 0.0, &mut rng).unwrap();
        assert!((next.speed() - 2.5 * 0.05).abs() < 1e-12);
    }

    #[test]
    fn constant_thrust_matches_kinematics() {
        let m = model();
        let a = 1.7;
        let mut x = VehicleState::at_rest(Vector2::zeros(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let k = 80;
        for _ in 0..k {
            x = m.step(&x, ControlInput::new(a, 0.0), 0.0, &mut rng).unwrap();
        }
        let t = k as f64 * m.dt;
        let exact = 0.5 * a * t * t;
        assert!((x.position.x - exact).abs() <= a * m.dt * m.dt * k as f64);
        assert!(x.position.y.abs() < 1e-15);
    }

    #[test]
    fn controls_are_clamped() {
        let m = model();
        let x = VehicleState::at_rest(Vector2::zeros(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let next = m.step(&x, ControlInput::new(1e3, -1e3), 0.0, &mut rng).unwrap();
        assert!((next.velocity.x - 4.0 * 0.05).abs() < 1e-12);
        assert!((next.angular_velocity + 12.0 * 0.05).abs() < 1e-12);
    }

    #[test]
    fn non_finite_state_is_reported() {
        let m = model();
        let mut x = VehicleState::at_rest(Vector2::zeros(), 0.0);
        x.velocity.x = f64::NAN;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            m.step(&x, ControlInput::default(), 0.0, &mut rng),
            Err(Error::SimulationDiverged { .. })
        ));
    }

    #[test]
    fn position_velocity_block_is_dt_identity() {
        let m = model();
        let x = VehicleState {
            position: Vector2::new(0.3, 0.1),
            heading: 0.9,
            velocity: Vector2::new(1.2, -0.4),
            angular_velocity: 0.3,
        };
        let (a, _, _) = m.linearize(&x, ControlInput::new(1.0, 0.5), 1e-5);
        for (i, j) in [(0, 3), (1, 4)] {
            assert!((a[(i, j)] - m.dt).abs() < 1e-6);
        }
        assert!(a[(0, 4)].abs() < 1e-6 && a[(1, 3)].abs() < 1e-6);
    }

    #[test]
    fn linearization_matches_analytic_jacobian() {
        let m = model();
        let dt = m.dt;
        let x = VehicleState {
            position: Vector2::new(-1.0, 2.0),
            heading: 3.1,
            velocity: Vector2::new(0.5, 0.2),
            angular_velocity: 1.1,
        };
        let u = ControlInput::new(2.0, -3.0);
        let (a, b, _) = m.linearize(&x, u, 1e-6);
        let (s, c) = x.heading.sin_cos();
        let mut a_exact = DMatrix::<f64>::identity(6, 6);
        a_exact[(0, 3)] = dt;
        a_exact[(1, 4)] = dt;
        a_exact[(2, 5)] = dt;
        a_exact[(3, 2)] = -dt * u.thrust * s;
        a_exact[(4, 2)] = dt * u.thrust * c;
        a_exact[(0, 2)] = -dt * dt * u.thrust * s;
        a_exact[(1, 2)] = dt * dt * u.thrust * c;
        let mut b_exact = DMatrix::<f64>::zeros(6, 2);
        b_exact[(3, 0)] = dt * c;
        b_exact[(4, 0)] = dt * s;
        b_exact[(0, 0)] = dt * dt * c;
        b_exact[(1, 0)] = dt * dt * s;
        b_exact[(5, 1)] = dt;
        b_exact[(2, 1)] = dt * dt;
        assert!((a - a_exact).amax() < 1e-8);
        assert!((b - b_exact).amax() < 1e-8);
    }

    #[test]
    fn richardson_consistency_of_linearization() {
        let m = model();
        let x = VehicleState {
            position: Vector2::new(4.0, 1.0),
            heading: -2.0,
            velocity: Vector2::new(-0.7, 1.3),
            angular_velocity: -0.4,
        };
        let u = ControlInput::new(-1.5, 2.0);
        let (a4, b4, _) = m.linearize(&x, u, 1e-4);
        let (a6, b6, _) = m.linearize(&x, u, 1e-6);
        let rel = |p: &DMatrix<f64>, q: &DMatrix<f64>| (p - q).amax() / q.amax();
        assert!(rel(&a4, &a6) < 1e-4);
        assert!(rel(&b4, &b6) < 1e-4);
    }

    #[test]
    fn straight_line_linearization_is_exact() {
        // Heading 0, no torque: the map is affine in (position, velocity, thrust).
        let m = model();
        let x = VehicleState::at_rest(Vector2::new(1.0, 1.0), 0.0);
        let u = ControlInput::new(1.0, 0.0);
        let (a, b, c) = m.linearize(&x, u, 1e-5);
        let dx = DVector::from_row_slice(&[0.3, -0.2, 0.0, 0.5, 0.1, 0.0]);
        let du = DVector::from_row_slice(&[0.7, 0.0]);
        let perturbed = VehicleState::from_slice((x.to_vector() + &dx).as_slice()).unwrap();
        let actual = m
            .propagate(&perturbed, ControlInput::new(u.thrust + du[0], 0.0))
            .to_vector();
        let predicted = c + a * dx + b * du;
        assert!((actual - predicted).amax() < 1e-9);
    }

    #[test]
    fn noise_free_dynamics_are_deterministic() {
        let m = model();
        let x = VehicleState {
            position: Vector2::new(0.1, 0.2),
            heading: 1.0,
            velocity: Vector2::new(1.0, 0.0),
            angular_velocity: 0.2,
        };
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let u = ControlInput::new(0.4, -0.3);
        assert_eq!(
            m.step(&x, u, 0.0, &mut r1).unwrap(),
            m.step(&x, u, 0.0, &mut r2).unwrap()
        );
    }
}
