//! Trains with PLATO on the desk-scale forest and prints the per-iteration
//! metrics written to `runs/plato_forest`.

use std::path::Path;

use plato::eval::{run_experiment, summarize_metrics, ExperimentConfig};

fn main() -> plato::Result<()> {
    let config = ExperimentConfig::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/forest.toml"))?;
    let out = Path::new("runs/plato_forest");
    let outcome = run_experiment(&config, Some(out))?;
    println!("{:>4} {:>8} {:>8} {:>9} {:>9}", "iter", "crashes", "mean_kl", "exceed", "mttf_s");
    for row in &outcome.rows {
        println!(
            "{:>4} {:>8} {:>8.3} {:>8.2}% {:>9.2}",
            row.iteration,
            row.training_crashes,
            row.mean_kl.unwrap_or(f64::NAN),
            100.0 * row.kl_exceed_frac.unwrap_or(f64::NAN),
            row.eval_mttf
        );
    }
    println!(
        "learner-executed actions during training: {}",
        outcome.history.learner_executed_actions()
    );
    print!("{}", summarize_metrics(out.join("metrics.csv"))?);
    Ok(())
}
