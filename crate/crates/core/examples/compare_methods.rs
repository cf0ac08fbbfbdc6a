//! PLATO, DAgger one-zero, coaching and supervised learning on the
//! canyon → forest → canyon schedule, one seed each.

use std::path::Path;

use plato::eval::{run_experiment, ExperimentConfig};
use plato::learners::Method;

fn main() -> plato::Result<()> {
    let base = ExperimentConfig::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/switch.toml"))?;
    println!("{:>11} {:>16} {:>14}", "method", "training crashes", "final MTTF (s)");
    for method in Method::ALL {
        let config = ExperimentConfig {
            method,
            ..base.clone()
        };
        let outcome = run_experiment(&config, None)?;
        let per_iteration: Vec<String> = outcome
            .history
            .records
            .iter()
            .map(|r| r.training_crashes.to_string())
            .collect();
        println!(
            "{:>11} {:>16} {:>14.2}   per iteration: {}",
            method.name(),
            outcome.history.total_crashes(),
            outcome.final_mttf(),
            per_iteration.join(" ")
        );
    }
    Ok(())
}
