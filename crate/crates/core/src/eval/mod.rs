//! Experiment harness: policy evaluation by mean time to failure, metrics
//! and snapshot persistence, and λ sweeps.

mod config;
mod metrics;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;

use crate::env::{crash_check, observe, respawn, ControlInput, FieldKind};
use crate::error::{Error, Result};
use crate::learners::streams::{derived_seed, stream_rng, Stream};
use crate::learners::{run_method, RunHistory};
use crate::policy::GaussianMlpPolicy;

pub use config::{
    CommandConfig, EvaluationConfig, ExperimentConfig, VehicleConfig, WorldConfig, WorldSwitch,
};
pub use metrics::{
    read_metrics, sparkline, summarize_metrics, write_sweep, MetricsRow, SweepRow, METRICS_HEADER,
};

/// Survival times of independent evaluation episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    /// Seconds flown before crashing, capped at the episode length.
    pub survival_times: Vec<f64>,
    pub crashes: usize,
}

impl EvaluationResult {
    /// Mean time to failure (s).
    pub fn mttf(&self) -> f64 {
        mean_time_to_failure(&self.survival_times)
    }

    pub fn crash_rate(&self) -> f64 {
        self.crashes as f64 / self.survival_times.len() as f64
    }
}

/// Arithmetic mean of survival times; zero for no episodes.
pub fn mean_time_to_failure(survival_times: &[f64]) -> f64 {
    if survival_times.is_empty() {
        return 0.0;
    }
    survival_times.iter().sum::<f64>() / survival_times.len() as f64
}

/// Flies the learner alone, executing its mean action, for `episodes`
/// episodes of at most `max_steps` steps. Episode `e` uses a freshly
/// generated world and respawn point that depend only on `(seed, e)`, so
/// different policies evaluated with the same seed face the same worlds.
pub fn evaluate_policy(
    policy: &GaussianMlpPolicy,
    config: &ExperimentConfig,
    kind: FieldKind,
    episodes: usize,
    max_steps: usize,
    seed: u64,
) -> Result<EvaluationResult> {
    let model = config.vehicle.model()?;
    let forward = config.cost.target_velocity[0];
    let mut survival_times = Vec::with_capacity(episodes);
    let mut crashes = 0;
    for episode in 0..episodes {
        let mut rng = stream_rng(seed, Stream::Evaluation, episode as u64);
        let field = config.world.generate(kind, rng.random(), config.vehicle.radius)?;
        let mut x = respawn(&field, config.world.respawn_clearance, &mut rng)?;
        let mut command = config.commands.map(|c| c.sample(forward, &mut rng));
        let mut survived = max_steps;
        for step in 0..max_steps {
            let o = observe(&field, &x, &config.sensor, command, &mut rng);
            let u = policy.mean(&o.to_vector())?;
            let crashed = match model.step(
                &x,
                ControlInput::new(u[0], u[1]),
                config.vehicle.actuator_noise,
                &mut rng,
            ) {
                Ok(next) => {
                    x = next;
                    crash_check(&field, &x, config.vehicle.radius)
                }
                Err(Error::SimulationDiverged { .. }) => true,
                Err(e) => return Err(e),
            };
            if crashed {
                survived = step + 1;
                crashes += 1;
                break;
            }
            if let (Some(c), Some(settings)) = (command.as_mut(), config.commands.as_ref()) {
                if (x.velocity - *c).norm() < settings.tolerance {
                    *c = settings.sample(forward, &mut rng);
                }
            }
        }
        survival_times.push(survived as f64 * model.dt);
    }
    Ok(EvaluationResult {
        survival_times,
        crashes,
    })
}

/// Evaluates the policy trained after `iteration` on that iteration's world
/// kind with the experiment's evaluation settings. The episode worlds do not
/// depend on `iteration`, so successive policies face the same episodes.
pub fn evaluate_iteration(
    policy: &GaussianMlpPolicy,
    config: &ExperimentConfig,
    iteration: usize,
) -> Result<EvaluationResult> {
    evaluate_policy(
        policy,
        config,
        config.world.kind_at(iteration.max(1)),
        config.evaluation.episodes,
        config.max_eval_steps(),
        derived_seed(config.seed, Stream::Evaluation, 0),
    )
}

/// Output of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub history: RunHistory,
    /// Evaluation of the policy trained after each iteration.
    pub evaluations: Vec<EvaluationResult>,
    pub rows: Vec<MetricsRow>,
    pub metrics_path: Option<PathBuf>,
}

impl ExperimentOutcome {
    pub fn final_mttf(&self) -> f64 {
        self.evaluations.last().map_or(0.0, EvaluationResult::mttf)
    }
}

/// Trains with the configured method, evaluates every iteration's policy
/// and, when `out_dir` is given, writes `metrics.csv`, `timing.csv`, the
/// resolved `config.toml` and `snapshots/iter_XXX.json`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentOutcome> {
    config.validate()?;
    let started = Instant::now();
    let history = run_method(config)?;
    let mut timing = vec![("training".to_string(), 0, started.elapsed().as_secs_f64())];

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir.join("snapshots"))?;
        std::fs::write(dir.join("config.toml"), config.to_toml_string())?;
    }
    let mut evaluations = Vec::with_capacity(history.records.len());
    let mut rows = Vec::with_capacity(history.records.len());
    for record in &history.records {
        let i = record.iteration;
        let policy = &history.policies[i];
        let eval_started = Instant::now();
        let evaluation = evaluate_iteration(policy, config, i)?;
        timing.push(("evaluation".to_string(), i, eval_started.elapsed().as_secs_f64()));
        let snapshot = format!("snapshots/iter_{i:03}.json");
        if let Some(dir) = out_dir {
            policy.save(dir.join(&snapshot))?;
        }
        rows.push(MetricsRow::new(record, &evaluation, config.kl_epsilon, snapshot));
        evaluations.push(evaluation);
    }
    let metrics_path = match out_dir {
        Some(dir) => {
            let path = dir.join("metrics.csv");
            metrics::write_metrics(&path, &rows)?;
            metrics::write_timing(&dir.join("timing.csv"), &timing)?;
            Some(path)
        }
        None => None,
    };
    Ok(ExperimentOutcome {
        history,
        evaluations,
        rows,
        metrics_path,
    })
}

/// Runs the experiment once per λ with the same master seed and summarizes
/// each run. With `out_dir`, each run writes to `lambda_<λ>/` and the
/// summary goes to `sweep.csv`.
pub fn lambda_sweep(base: &ExperimentConfig, lambdas: &[f64], out_dir: Option<&Path>) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() {
        return Err(Error::Config("lambda sweep needs at least one value".into()));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut config = base.clone();
        config.mpc.lambda = lambda;
        let dir = out_dir.map(|d| d.join(format!("lambda_{lambda}")));
        let outcome = run_experiment(&config, dir.as_deref())?;
        rows.push(SweepRow::from_outcome(lambda, &outcome));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_sweep(&dir.join("sweep.csv"), &rows)?;
    }
    Ok(rows)
}
