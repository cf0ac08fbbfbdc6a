//! Sweeps the KL weight on a shortened forest run and reports the trade-off
//! between teacher cost and divergence from the learner.

use std::path::Path;

use plato::eval::{lambda_sweep, ExperimentConfig};

fn main() -> plato::Result<()> {
    let mut config = ExperimentConfig::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/forest.toml"))?;
    config.iterations = 5;
    config.evaluation.episodes = 5;
    let rows = lambda_sweep(&config, &[0.0, 1.0, 10.0, 100.0, 1000.0], None)?;
    println!("{:>8} {:>12} {:>8} {:>10} {:>10}", "lambda", "stage cost", "crashes", "MTTF (s)", "mean KL");
    for r in rows {
        println!(
            "{:>8} {:>12.2} {:>8} {:>10.2} {:>10.4}",
            r.lambda,
            r.teacher_cost,
            r.training_crashes,
            r.final_mttf,
            r.mean_kl.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
