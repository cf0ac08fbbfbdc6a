//! How the KL weight λ moves the adaptive teacher from the MPC supervisor
//! toward the learner at one state.

use nalgebra::{DMatrix, DVector, Vector2};
use plato::env::{Circle, ObstacleField, VehicleState};
use plato::eval::ExperimentConfig;
use plato::gaussian::{kl_divergence, Gaussian};
use plato::trajopt::{mpc_star_plan, mpc_teacher_plan, MpcContext};

fn main() -> plato::Result<()> {
    let config = ExperimentConfig::default();
    let model = config.vehicle.model()?;
    let field = ObstacleField::from_circles(vec![Circle {
        center: Vector2::new(1.6, 0.3),
        radius: 0.5,
    }]);
    let context = MpcContext {
        model: &model,
        cost: &config.cost,
        field: &field,
    };
    let mut x = VehicleState::at_rest(Vector2::zeros(), 0.2);
    x.velocity = Vector2::new(1.0, 0.2);

    // A learner that accelerates and turns left, toward the trunk.
    let learner = Gaussian::new(DVector::from_row_slice(&[2.0, 3.0]), DMatrix::identity(2, 2) * 0.25)?;
    let star = mpc_star_plan(context, &x, &config.mpc, None)?;
    println!(
        "supervisor mean [{:+.3} {:+.3}], learner mean [{:+.3} {:+.3}]",
        star.action.mean()[0],
        star.action.mean()[1],
        learner.mean()[0],
        learner.mean()[1]
    );
    println!("{:>8} {:>18} {:>10}", "lambda", "teacher mean", "KL");
    for lambda in [0.0, 0.1, 1.0, 10.0, 100.0, 1000.0, 1e8] {
        let plan = mpc_teacher_plan(context, &x, &learner, &config.mpc.with_lambda(lambda), None)?;
        let m = plan.action.mean();
        println!(
            "{lambda:>8} [{:+7.3} {:+7.3}] {:>10.4}",
            m[0],
            m[1],
            kl_divergence(&plan.action, &learner)?
        );
    }
    Ok(())
}
