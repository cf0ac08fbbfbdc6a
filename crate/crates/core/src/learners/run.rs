use nalgebra::{DMatrix, DVector, Vector2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::schedule::{beta_value, BetaSchedule};
use super::streams::{stream_rng, Stream};
use super::{ActionSource, IterationRecord, Method, ProvenanceEntry, RunHistory};
use crate::env::{
    crash_check, observe, respawn, ControlInput, FieldKind, ObstacleField, TaskCost, VehicleModel, VehicleState,
    CONTROL_DIM,
};
use crate::error::{Error, Result};
use crate::eval::ExperimentConfig;
use crate::gaussian::{kl_divergence, symmetrize, Gaussian};
use crate::policy::{
    fit_policy_covariance, train_policy, DemoDataset, DemoRecord, GaussianMlpPolicy, Normalizer,
};
use crate::trajopt::{
    mpc_star_plan, mpc_teacher_plan, LinearGaussianController, MpcContext, MpcPlan, VehicleProblem,
};

/// PLATO: execute the adaptive teacher `π_λ`, label with `π*`.
pub fn run_plato(config: &ExperimentConfig) -> Result<RunHistory> {
    run_loop(config, Method::Plato, config.schedule)
}

/// DAgger: execute the per-step mixture `β_i π* + (1 − β_i) π_θ`, label
/// with `π*`.
pub fn run_dagger(config: &ExperimentConfig, schedule: BetaSchedule) -> Result<RunHistory> {
    run_loop(config, Method::Dagger, schedule)
}

/// DAgger with coaching: execute as DAgger, label with `π_λ`.
pub fn run_coaching(config: &ExperimentConfig, schedule: BetaSchedule) -> Result<RunHistory> {
    run_loop(config, Method::Coaching, schedule)
}

/// Supervised learning: execute and label with `π*`.
pub fn run_supervised(config: &ExperimentConfig) -> Result<RunHistory> {
    run_loop(config, Method::Supervised, config.schedule)
}

/// Runs the method and schedule named in the config.
pub fn run_method(config: &ExperimentConfig) -> Result<RunHistory> {
    run_loop(config, config.method, config.schedule)
}

struct Rngs {
    observation: ChaCha8Rng,
    dynamics: ChaCha8Rng,
    action: ChaCha8Rng,
    mix: ChaCha8Rng,
    label: ChaCha8Rng,
    respawn: ChaCha8Rng,
    train: ChaCha8Rng,
    command: ChaCha8Rng,
}

impl Rngs {
    fn new(seed: u64) -> Self {
        Rngs {
            observation: stream_rng(seed, Stream::Observation, 0),
            dynamics: stream_rng(seed, Stream::Dynamics, 0),
            action: stream_rng(seed, Stream::Action, 0),
            mix: stream_rng(seed, Stream::Mix, 0),
            label: stream_rng(seed, Stream::Label, 0),
            respawn: stream_rng(seed, Stream::Respawn, 0),
            train: stream_rng(seed, Stream::Train, 0),
            command: stream_rng(seed, Stream::Command, 0),
        }
    }
}

/// An action distribution for the current step, possibly from a fallback.
#[derive(Clone)]
struct StepPlan {
    action: Gaussian,
    fallback: bool,
}

fn is_planner_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::OptimizationFailed(_) | Error::SimulationDiverged { .. } | Error::Numerical { .. }
    )
}

/// Accepts a fresh plan, or on planner failure falls back to the previous
/// plan shifted by one step (or hover when there is none).
fn resolve_plan(
    result: Result<MpcPlan>,
    warm: &mut Option<LinearGaussianController>,
    context: MpcContext<'_>,
    x: &VehicleState,
    faults: &mut usize,
) -> Result<StepPlan> {
    match result {
        Ok(plan) => {
            *warm = Some(plan.controller.shifted());
            Ok(StepPlan {
                action: plan.action,
                fallback: false,
            })
        }
        Err(e) if is_planner_failure(&e) => {
            *faults += 1;
            let action = match warm.take() {
                Some(previous) => {
                    let problem = VehicleProblem::new(context, 1e-6);
                    let mut mean = previous.mean_action_with(&problem, 0, &x.to_vector());
                    context.model.bounds.clamp_vector(&mut mean);
                    let g = Gaussian::new(mean, previous.covariance(0).clone())?;
                    *warm = Some(previous.shifted());
                    g
                }
                None => Gaussian::isotropic(DVector::from_row_slice(&context.cost.hover_control), 1.0)?,
            };
            Ok(StepPlan {
                action,
                fallback: true,
            })
        }
        Err(e) => Err(e),
    }
}

fn commanded_cost(base: &TaskCost, command: Option<Vector2<f64>>) -> TaskCost {
    match command {
        Some(c) => TaskCost {
            target_velocity: [c.x, c.y],
            ..*base
        },
        None => *base,
    }
}

/// The learner's action distribution with its mean projected onto the
/// actuator box, i.e. the distribution of what the actuators would apply.
fn learner_distribution(policy: &GaussianMlpPolicy, o: &[f64], model: &VehicleModel) -> Result<Gaussian> {
    let mut mean = policy.mean(o)?;
    model.bounds.clamp_vector(&mut mean);
    Gaussian::new(mean, policy.covariance().clone())
}

/// Hidden layers are randomly initialized; the output layer is zero with a
/// hover bias, so the untrained learner commands hover everywhere.
fn initial_policy(config: &ExperimentConfig) -> Result<GaussianMlpPolicy> {
    let mut rng = stream_rng(config.seed, Stream::Init, 0);
    let mut policy = GaussianMlpPolicy::new(
        config.observation_dim(),
        &config.policy.hidden_layers,
        CONTROL_DIM,
        DMatrix::identity(CONTROL_DIM, CONTROL_DIM) * config.policy.initial_variance,
        &mut rng,
    )?;
    let output = policy.layers_mut().last_mut().expect("policy has an output layer");
    output.weights.fill(0.0);
    output.bias = DVector::from_row_slice(&config.cost.hover_control);
    Ok(policy)
}

fn run_loop(config: &ExperimentConfig, method: Method, schedule: BetaSchedule) -> Result<RunHistory> {
    config.validate()?;
    let model = config.vehicle.model()?;
    let mpc = config.mpc;
    let n = config.iterations;
    let mut rngs = Rngs::new(config.seed);
    let mut policy = initial_policy(config)?;
    let mut dataset = DemoDataset::new();
    let mut records = Vec::with_capacity(n);
    let mut policies = vec![policy.clone()];
    let mut provenance = Vec::new();

    let forward = config.cost.target_velocity[0];
    let mut command = config.commands.map(|c| c.sample(forward, &mut rngs.command));
    let mut world: Option<(FieldKind, ObstacleField)> = None;
    let mut x = VehicleState::at_rest(Vector2::zeros(), 0.0);
    let mut warm_teacher: Option<LinearGaussianController> = None;
    let mut warm_star: Option<LinearGaussianController> = None;

    for i in 1..=n {
        let kind = config.world.kind_at(i);
        if world.as_ref().map(|w| w.0) != Some(kind) {
            let field = config.world.generate(
                kind,
                super::field_seed(config.seed, i),
                config.vehicle.radius,
            )?;
            x = respawn(&field, config.world.respawn_clearance, &mut rngs.respawn)?;
            warm_teacher = None;
            warm_star = None;
            world = Some((kind, field));
        }
        let field = &world.as_ref().expect("world set above").1;
        let beta = match method {
            Method::Dagger | Method::Coaching => beta_value(schedule, i, n),
            Method::Plato | Method::Supervised => 1.0,
        };

        let mut crashes = 0;
        let mut faults = 0;
        let mut learner_actions = 0;
        let mut learner_queries = 0;
        let mut cost_sum = 0.0;
        let mut kl = Vec::new();

        for step in 0..config.steps_per_iteration {
            let cost = commanded_cost(&config.cost, command);
            let context = MpcContext {
                model: &model,
                cost: &cost,
                field,
            };
            let o = observe(field, &x, &config.sensor, command, &mut rngs.observation).to_vector();

            let uses_teacher = matches!(method, Method::Plato | Method::Coaching);
            let mut learner: Option<Gaussian> = None;
            let mut teacher: Option<StepPlan> = None;
            if uses_teacher {
                let q = learner_distribution(&policy, &o, &model)?;
                learner_queries += 1;
                if mpc.lambda > 0.0 {
                    let result = mpc_teacher_plan(context, &x, &q, &mpc, warm_teacher.as_ref());
                    teacher = Some(resolve_plan(result, &mut warm_teacher, context, &x, &mut faults)?);
                }
                learner = Some(q);
            }
            let result = mpc_star_plan(context, &x, &mpc, warm_star.as_ref());
            let star = resolve_plan(result, &mut warm_star, context, &x, &mut faults)?;
            if uses_teacher && teacher.is_none() {
                // With λ = 0 the teacher is the supervisor.
                teacher = Some(star.clone());
            }

            let (executed, source) = match method {
                Method::Plato => {
                    let t = teacher.as_ref().expect("teacher planned");
                    (&t.action, if t.fallback { ActionSource::Fallback } else { ActionSource::Teacher })
                }
                Method::Supervised => (
                    &star.action,
                    if star.fallback { ActionSource::Fallback } else { ActionSource::Supervisor },
                ),
                Method::Dagger | Method::Coaching => {
                    if rngs.mix.random::<f64>() < beta {
                        (
                            &star.action,
                            if star.fallback { ActionSource::Fallback } else { ActionSource::Supervisor },
                        )
                    } else {
                        if learner.is_none() {
                            learner = Some(learner_distribution(&policy, &o, &model)?);
                            learner_queries += 1;
                        }
                        learner_actions += 1;
                        (learner.as_ref().expect("learner queried"), ActionSource::Learner)
                    }
                }
            };
            let u = executed.sample(&mut rngs.action)?;
            provenance.push(ProvenanceEntry {
                iteration: i,
                step,
                source,
            });

            if let (Some(t), Some(q)) = (&teacher, &learner) {
                if !t.fallback {
                    kl.push(kl_divergence(&t.action, q)?);
                }
            }

            let label = match method {
                Method::Coaching => teacher.as_ref().expect("teacher planned"),
                _ => &star,
            };
            if !label.fallback {
                dataset.push(DemoRecord {
                    observation: DVector::from_vec(o),
                    label_mean: label.action.mean().clone(),
                    label_precision: symmetrize(&label.action.precision()?),
                    sampled_action: Some(label.action.sample(&mut rngs.label)?),
                })?;
            }

            let control = ControlInput::new(u[0], u[1]);
            cost_sum += cost.stage_cost(field, &x, model.bounds.clamp(control));
            let crashed = match model.step(&x, control, config.vehicle.actuator_noise, &mut rngs.dynamics) {
                Ok(next) => {
                    let hit = crash_check(field, &next, config.vehicle.radius);
                    x = next;
                    hit
                }
                Err(Error::SimulationDiverged { .. }) => true,
                Err(e) => return Err(e),
            };
            if crashed {
                crashes += 1;
                x = respawn(field, config.world.respawn_clearance, &mut rngs.respawn)?;
                warm_teacher = None;
                warm_star = None;
            }
            if let (Some(c), Some(settings)) = (command.as_mut(), config.commands.as_ref()) {
                if (x.velocity - *c).norm() < settings.tolerance {
                    *c = settings.sample(forward, &mut rngs.command);
                }
            }
        }

        let train_loss = if dataset.is_empty() {
            None
        } else {
            policy.set_normalizer(Normalizer::fit(&dataset, config.policy.normalizer_min_scale)?)?;
            if !config.policy.fixed_covariance {
                policy.set_covariance(fit_policy_covariance(&dataset)?)?;
            }
            Some(train_policy(&mut policy, &dataset, &config.policy.train, &mut rngs.train)?.final_loss)
        };
        records.push(IterationRecord {
            iteration: i,
            world: kind,
            beta,
            dataset_size: dataset.len(),
            training_crashes: crashes,
            planner_faults: faults,
            learner_actions,
            learner_queries,
            mean_stage_cost: cost_sum / config.steps_per_iteration as f64,
            kl,
            train_loss,
        });
        policies.push(policy.clone());
    }

    Ok(RunHistory {
        method,
        records,
        policies,
        dataset,
        provenance,
    })
}
