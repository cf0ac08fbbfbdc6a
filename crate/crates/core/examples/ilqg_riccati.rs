//! Max-entropy iLQG on a linear-quadratic problem recovers the Riccati gains;
//! the action covariance is the temperature times the inverse control Hessian.

use nalgebra::{DMatrix, DVector};
use plato::trajopt::{max_entropy_ilqg, Dynamics, MpcConfig, QuadraticCost, TrajectoryCost};

/// Double integrator with position and velocity costs.
struct DoubleIntegrator {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl Dynamics for DoubleIntegrator {
    fn state_dim(&self) -> usize {
        2
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }
    fn linearize(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.a.clone(), self.b.clone())
    }
}

impl TrajectoryCost for DoubleIntegrator {
    fn stage(&self, _t: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + 0.5 * u.dot(&(&self.r * u))
    }
    fn terminal(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x))
    }
    fn expand_stage(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> QuadraticCost {
        QuadraticCost {
            value: self.stage(t, x, u),
            lx: &self.q * x,
            lu: &self.r * u,
            lxx: self.q.clone(),
            luu: self.r.clone(),
            lux: DMatrix::zeros(1, 2),
        }
    }
    fn expand_terminal(&self, x: &DVector<f64>) -> QuadraticCost {
        QuadraticCost::state_only(self.terminal(x), &self.q * x, self.q.clone())
    }
}

fn main() -> plato::Result<()> {
    let dt = 0.1;
    let problem = DoubleIntegrator {
        a: DMatrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]),
        b: DMatrix::from_row_slice(2, 1, &[0.0, dt]),
        q: DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 0.1])),
        r: DMatrix::from_element(1, 1, 0.01),
    };
    let horizon = 30;
    let config = MpcConfig {
        horizon,
        ..MpcConfig::default()
    };
    let x0 = DVector::from_row_slice(&[1.0, 0.0]);
    let solution = max_entropy_ilqg(&problem, &problem, &x0, &config, None)?;

    // Riccati recursion backward from the terminal cost.
    let mut p = problem.q.clone();
    let mut gains = Vec::new();
    for _ in 0..horizon {
        let bt_p = problem.b.transpose() * &p;
        let k = -(&problem.r + &bt_p * &problem.b).try_inverse().unwrap() * &bt_p * &problem.a;
        p = &problem.q + problem.a.transpose() * &p * (&problem.a + &problem.b * &k);
        gains.push(k);
    }
    gains.reverse();

    for t in [0, horizon / 2, horizon - 1] {
        let k = solution.controller.gain(t);
        println!(
            "t = {t:2}: iLQG gain [{:.5} {:.5}], Riccati [{:.5} {:.5}], action variance {:.5}",
            k[(0, 0)],
            k[(0, 1)],
            gains[t][(0, 0)],
            gains[t][(0, 1)],
            solution.controller.covariance(t)[(0, 0)]
        );
    }
    Ok(())
}
