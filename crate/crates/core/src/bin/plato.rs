use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use plato::eval::{
    evaluate_policy, lambda_sweep, run_experiment, summarize_metrics, ExperimentConfig,
};
use plato::policy::GaussianMlpPolicy;
use plato::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Train and evaluate navigation policies with an adaptive MPC teacher")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train with the configured method and write metrics and snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs/latest")]
        out: PathBuf,
    },
    /// Evaluate a saved policy by mean time to failure.
    Eval {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run the experiment once per KL weight.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        lambda: Vec<f64>,
        #[arg(long, default_value = "runs/sweep")]
        out: PathBuf,
    },
    /// Print the geometry of the configured world.
    ExportWorld {
        #[arg(long)]
        config: PathBuf,
        /// Iteration whose world to export.
        #[arg(long, default_value_t = 1)]
        iteration: usize,
    },
    /// Sparkline summary of a metrics file.
    Summary {
        #[arg(long)]
        metrics: PathBuf,
    },
}

/// Runs the command and returns what it prints.
fn execute(command: Command) -> Result<String> {
    let mut out = String::new();
    match command {
        Command::Run { config, seed, out: dir } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let outcome = run_experiment(&config, Some(&dir))?;
            let summary = summarize_metrics(dir.join("metrics.csv"))?;
            let _ = writeln!(
                out,
                "{summary}{} crashes in training, final MTTF {:.2} s, written to {}",
                outcome.history.total_crashes(),
                outcome.final_mttf(),
                dir.display()
            );
        }
        Command::Eval {
            policy,
            config,
            episodes,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let policy = GaussianMlpPolicy::load(&policy)?;
            let result = evaluate_policy(
                &policy,
                &config,
                config.world.kind_at(1),
                episodes.unwrap_or(config.evaluation.episodes),
                config.max_eval_steps(),
                config.seed,
            )?;
            let times: Vec<String> = result.survival_times.iter().map(|t| format!("{t:.2}")).collect();
            let _ = writeln!(out, "survival times (s): {}", times.join(" "));
            let _ = writeln!(out, "MTTF {:.3} s, crash rate {:.3}", result.mttf(), result.crash_rate());
        }
        Command::Sweep { config, lambda, out: dir } => {
            let config = ExperimentConfig::load(&config)?;
            let rows = lambda_sweep(&config, &lambda, Some(&dir))?;
            let _ = writeln!(out, "{:>10} {:>12} {:>8} {:>10} {:>10}", "lambda", "stage_cost", "crashes", "mttf", "mean_kl");
            for r in rows {
                let kl = r.mean_kl.map_or("-".to_string(), |k| format!("{k:.4}"));
                let _ = writeln!(
                    out,
                    "{:>10} {:>12.3} {:>8} {:>10.3} {:>10}",
                    r.lambda, r.teacher_cost, r.training_crashes, r.final_mttf, kl
                );
            }
            let _ = writeln!(out, "written to {}", dir.join("sweep.csv").display());
        }
        Command::ExportWorld { config, iteration } => {
            let config = ExperimentConfig::load(&config)?;
            let iteration = iteration.max(1);
            let field = config.world.generate(
                config.world.kind_at(iteration),
                plato::learners::field_seed(config.seed, config.world.segment_start(iteration)),
                config.vehicle.radius,
            )?;
            out.push_str(&field.to_listing());
        }
        Command::Summary { metrics } => out.push_str(&summarize_metrics(&metrics)?),
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(text) => {
            // A closed pipe (e.g. `| head`) is not an error.
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
