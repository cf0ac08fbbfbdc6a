//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector2};
use plato::env::{observe, respawn};
use plato::eval::{run_experiment, ExperimentConfig, ExperimentOutcome};
use plato::gaussian::{kl_divergence, Gaussian};
use plato::learners::{BetaSchedule, Method};
use plato::policy::{
    fit_policy_covariance, loss_and_gradient, train_policy, weighted_loss, DemoDataset, DemoRecord,
    GaussianMlpPolicy, Normalizer, TrainConfig,
};
use plato::trajopt::{
    max_entropy_ilqg, mpc_star_plan, mpc_teacher_plan, Dynamics, MpcConfig, MpcContext,
    QuadraticCost, TrajectoryCost,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| gauss(rng))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, n, n);
    m.transpose() * &m + DMatrix::identity(n, n) * 0.1
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

// ---- 1: iLQG against the Riccati recursion -------------------------------

struct Lq {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    qf: DMatrix<f64>,
}

impl Dynamics for Lq {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn control_dim(&self) -> usize {
        self.b.ncols()
    }
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }
    fn linearize(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.a.clone(), self.b.clone())
    }
}

impl TrajectoryCost for Lq {
    fn stage(&self, _t: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + 0.5 * u.dot(&(&self.r * u))
    }
    fn terminal(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.qf * x))
    }
    fn expand_stage(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> QuadraticCost {
        QuadraticCost {
            value: self.stage(t, x, u),
            lx: &self.q * x,
            lu: &self.r * u,
            lxx: self.q.clone(),
            luu: self.r.clone(),
            lux: DMatrix::zeros(u.len(), x.len()),
        }
    }
    fn expand_terminal(&self, x: &DVector<f64>) -> QuadraticCost {
        QuadraticCost::state_only(self.terminal(x), &self.qf * x, self.qf.clone())
    }
}

/// Gains `K_0..K_{H-1}` of the finite-horizon discrete Riccati recursion.
fn riccati_gains(lq: &Lq, horizon: usize) -> Vec<DMatrix<f64>> {
    let mut p = lq.qf.clone();
    let mut gains = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let bt_p = lq.b.transpose() * &p;
        let k = -(&lq.r + &bt_p * &lq.b).try_inverse().unwrap() * &bt_p * &lq.a;
        p = &lq.q + lq.a.transpose() * &p * (&lq.a + &lq.b * &k);
        p = (&p + p.transpose()) * 0.5;
        gains.push(k);
    }
    gains.reverse();
    gains
}

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let horizon = 20;
    let config = MpcConfig {
        horizon,
        max_iterations: 20,
        ..MpcConfig::default()
    };
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(4..=6);
        let lq = Lq {
            a: DMatrix::identity(n, n) + random_matrix(&mut rng, n, n) * 0.1,
            b: random_matrix(&mut rng, n, 2) * 0.5,
            q: random_spd(&mut rng, n),
            r: random_spd(&mut rng, 2),
            qf: random_spd(&mut rng, n),
        };
        let x0 = DVector::from_fn(n, |_, _| gauss(&mut rng));
        let solution = max_entropy_ilqg(&lq, &lq, &x0, &config, None).map_err(|e| e.to_string())?;
        for (t, k) in riccati_gains(&lq, horizon).iter().enumerate() {
            worst = worst.max((solution.controller.gain(t) - k).amax());
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    check(
        worst < 1e-6 && elapsed < 5.0,
        format!("max gain error {worst:.2e} over 50 instances in {elapsed:.2} s"),
    )
}

// ---- 2: KL against Monte Carlo --------------------------------------------

/// Log-density evaluator with the inverse and log-determinant precomputed.
struct Density {
    mean: DVector<f64>,
    inverse: DMatrix<f64>,
    log_norm: f64,
}

impl Density {
    fn new(g: &Gaussian) -> Self {
        let d = g.dim() as f64;
        let cov = g.covariance();
        Density {
            mean: g.mean().clone(),
            inverse: cov.clone().try_inverse().unwrap(),
            log_norm: -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + cov.determinant().ln()),
        }
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += (x[i] - self.mean[i]) * self.inverse[(i, j)] * (x[j] - self.mean[j]);
            }
        }
        self.log_norm - 0.5 * quad
    }
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let samples = 1_000_000;
    let mut worst_z: f64 = 0.0;
    for pair in 0..20 {
        let d = 1 + pair % 4;
        let gaussian = |rng: &mut ChaCha8Rng| {
            let cov = random_spd(rng, d) + DMatrix::identity(d, d) * 0.4;
            Gaussian::new(DVector::from_fn(d, |_, _| gauss(rng)), cov).unwrap()
        };
        let p = gaussian(&mut rng);
        let q = gaussian(&mut rng);
        let exact = kl_divergence(&p, &q).map_err(|e| e.to_string())?;
        let (dp, dq) = (Density::new(&p), Density::new(&q));
        let chol = p.covariance().clone().cholesky().unwrap().l();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        let mut z = [0.0; 4];
        let mut x = [0.0; 4];
        for _ in 0..samples {
            for zi in z.iter_mut().take(d) {
                *zi = gauss(&mut rng);
            }
            for i in 0..d {
                x[i] = p.mean()[i] + (0..=i).map(|j| chol[(i, j)] * z[j]).sum::<f64>();
            }
            let v = dp.log_density(&x[..d]) - dq.log_density(&x[..d]);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / samples as f64;
        let se = ((sum_sq / samples as f64 - mean * mean).max(0.0) / samples as f64).sqrt();
        worst_z = worst_z.max((exact - mean).abs() / se);
    }
    check(
        worst_z <= 3.0,
        format!("largest deviation {worst_z:.2} standard errors over 20 pairs of 10^6 samples"),
    )
}

// ---- 3: teacher limit laws --------------------------------------------------

fn criterion_3() -> Verdict {
    let config = ExperimentConfig::load(config_path("forest.toml")).map_err(|e| e.to_string())?;
    let model = config.vehicle.model().map_err(|e| e.to_string())?;
    let field = config
        .world
        .generate(config.world.kind, 11, config.vehicle.radius)
        .map_err(|e| e.to_string())?;
    let context = MpcContext {
        model: &model,
        cost: &config.cost,
        field: &field,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut policy = GaussianMlpPolicy::new(
        config.observation_dim(),
        &config.policy.hidden_layers,
        2,
        DMatrix::from_row_slice(2, 2, &[0.3, 0.05, 0.05, 0.5]),
        &mut rng,
    )
    .map_err(|e| e.to_string())?;
    // Keep the learner's means well inside the actuator box.
    let small: Vec<f64> = policy.parameters().iter().map(|w| 0.1 * w).collect();
    policy.set_parameters(&small).map_err(|e| e.to_string())?;

    let (mut star_exact, mut worst_gap, mut monotone) = (true, 0.0_f64, true);
    for _ in 0..8 {
        let mut x = respawn(&field, config.world.respawn_clearance, &mut rng).map_err(|e| e.to_string())?;
        x.velocity = Vector2::new(rng.random_range(0.5..1.5), rng.random_range(-0.3..0.3));
        x.heading = rng.random_range(-0.3..0.3);
        let o = observe(&field, &x, &config.sensor, None, &mut rng);
        let learner = policy.forward(&o).map_err(|e| e.to_string())?;
        let plan = |lambda: f64| mpc_teacher_plan(context, &x, &learner, &config.mpc.with_lambda(lambda), None);

        let star = mpc_star_plan(context, &x, &config.mpc, None).map_err(|e| e.to_string())?;
        star_exact &= plan(0.0).map_err(|e| e.to_string())?.action == star.action;
        let far = plan(1e8).map_err(|e| e.to_string())?;
        worst_gap = worst_gap.max((far.action.mean() - learner.mean()).amax());
        let mut previous = f64::INFINITY;
        for lambda in [0.0, 1.0, 10.0, 100.0, 1000.0] {
            let teacher = plan(lambda).map_err(|e| e.to_string())?;
            let kl = kl_divergence(&teacher.action, &learner).map_err(|e| e.to_string())?;
            monotone &= kl <= previous * (1.0 + 1e-9);
            previous = kl;
        }
    }
    check(
        star_exact && worst_gap < 1e-3 && monotone,
        format!(
            "λ=0 equals π*: {star_exact}; λ=1e8 mean gap {worst_gap:.2e}; KL non-increasing: {monotone} (8 states)"
        ),
    )
}

// ---- 4: supervised objective ------------------------------------------------

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, input: usize) -> DemoDataset {
    let mut data = DemoDataset::new();
    for _ in 0..n {
        data.push(DemoRecord {
            observation: DVector::from_fn(input, |_, _| gauss(rng)),
            label_mean: DVector::from_fn(2, |_, _| gauss(rng)),
            label_precision: random_spd(rng, 2),
            sampled_action: None,
        })
        .unwrap();
    }
    data
}

fn gradient_error(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for hidden in [vec![], vec![6], vec![5, 4]] {
        let data = random_dataset(rng, 12, 4);
        let mut p = GaussianMlpPolicy::new(4, &hidden, 2, DMatrix::identity(2, 2), rng).unwrap();
        let theta: Vec<f64> = p.parameters().iter().map(|_| 0.5 * gauss(rng)).collect();
        p.set_parameters(&theta).unwrap();
        let (_, grad) = loss_and_gradient(&p, &data).unwrap();
        let h = 1e-6;
        let mut fd = vec![0.0; theta.len()];
        for i in 0..theta.len() {
            let mut shifted = theta.clone();
            shifted[i] = theta[i] + h;
            p.set_parameters(&shifted).unwrap();
            let plus = weighted_loss(&p, &data).unwrap();
            shifted[i] = theta[i] - h;
            p.set_parameters(&shifted).unwrap();
            let minus = weighted_loss(&p, &data).unwrap();
            fd[i] = (plus - minus) / (2.0 * h);
        }
        let mut offset = 0;
        for layer in p.layers() {
            let n = layer.weights.len() + layer.bias.len();
            let a = DVector::from_column_slice(&grad[offset..offset + n]);
            let f = DVector::from_column_slice(&fd[offset..offset + n]);
            worst = worst.max((&a - &f).norm() / a.norm().max(f.norm()));
            offset += n;
        }
    }
    worst
}

fn least_squares_gap(rng: &mut ChaCha8Rng) -> f64 {
    let n = 200;
    let w = DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 2.0, 0.3, 0.8, -1.2]);
    let b = DVector::from_row_slice(&[0.5, -1.0]);
    let mut data = DemoDataset::new();
    for _ in 0..n {
        let o = DVector::from_fn(3, |_, _| 2.0 * gauss(rng) + 1.0);
        let noise = DVector::from_fn(2, |_, _| 0.3 * gauss(rng));
        data.push(DemoRecord {
            label_mean: &w * &o + &b + noise,
            observation: o,
            label_precision: DMatrix::identity(2, 2),
            sampled_action: None,
        })
        .unwrap();
    }
    let design = DMatrix::from_fn(n, 4, |i, j| if j < 3 { data.records()[i].observation[j] } else { 1.0 });
    let targets = DMatrix::from_fn(n, 2, |i, j| data.records()[i].label_mean[j]);
    let coef = (design.transpose() * &design)
        .cholesky()
        .unwrap()
        .solve(&(design.transpose() * &targets));
    let optimum = (&design * coef - &targets).norm_squared() / n as f64;

    let mut p = GaussianMlpPolicy::new(3, &[], 2, DMatrix::identity(2, 2), rng).unwrap();
    p.set_normalizer(Normalizer::fit(&data, 0.0).unwrap()).unwrap();
    let config = TrainConfig {
        learning_rate: 0.01,
        batch_size: n,
        epochs: 4000,
        ..TrainConfig::default()
    };
    train_policy(&mut p, &data, &config, rng).unwrap().final_loss - optimum
}

fn covariance_error(rng: &mut ChaCha8Rng) -> f64 {
    let mut data = DemoDataset::new();
    let mut sum = [0.0; 3];
    for _ in 0..25 {
        let p = random_spd(rng, 2);
        sum[0] += p[(0, 0)];
        sum[1] += p[(0, 1)];
        sum[2] += p[(1, 1)];
        data.push(DemoRecord {
            observation: DVector::zeros(1),
            label_mean: DVector::zeros(2),
            label_precision: p,
            sampled_action: None,
        })
        .unwrap();
    }
    let [a, b, d] = sum.map(|s| s / 25.0);
    let det = a * d - b * b;
    let oracle = DMatrix::from_row_slice(2, 2, &[d / det, -b / det, -b / det, a / det]);
    (fit_policy_covariance(&data).unwrap() - oracle).amax()
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let grad = gradient_error(&mut rng);
    let gap = least_squares_gap(&mut rng);
    let cov = covariance_error(&mut rng);
    check(
        grad <= 1e-5 && (-1e-12..1e-4).contains(&gap) && cov <= 1e-12,
        format!("gradient rel. error {grad:.2e}; loss above least squares {gap:.2e}; covariance error {cov:.2e}"),
    )
}

// ---- 5-8: training runs -------------------------------------------------------

const SEEDS: [u64; 3] = [1, 2, 3];

fn run(config: &ExperimentConfig, method: Method, seed: u64) -> Result<ExperimentOutcome, String> {
    let config = ExperimentConfig {
        method,
        seed,
        ..config.clone()
    };
    run_experiment(&config, None).map_err(|e| e.to_string())
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

struct ForestRuns {
    plato: Vec<ExperimentOutcome>,
    supervised: Vec<ExperimentOutcome>,
    kl_epsilon: f64,
}

fn forest_runs() -> Result<ForestRuns, String> {
    let config = ExperimentConfig::load(config_path("forest.toml")).map_err(|e| e.to_string())?;
    let mut plato = Vec::new();
    let mut supervised = Vec::new();
    for seed in SEEDS {
        plato.push(run(&config, Method::Plato, seed)?);
        supervised.push(run(&config, Method::Supervised, seed)?);
    }
    Ok(ForestRuns {
        plato,
        supervised,
        kl_epsilon: config.kl_epsilon,
    })
}

fn criterion_5(runs: &ForestRuns) -> Verdict {
    let executed: usize = runs.plato.iter().map(|o| o.history.learner_executed_actions()).sum();
    let steps: usize = runs.plato.iter().map(|o| o.history.provenance.len()).sum();
    check(
        executed == 0 && steps > 0,
        format!("{executed} learner-executed actions in {steps} PLATO steps"),
    )
}

fn criterion_6(runs: &ForestRuns) -> Verdict {
    let first = mean(runs.plato.iter().map(|o| o.evaluations[0].mttf()));
    let last = mean(runs.plato.iter().map(ExperimentOutcome::final_mttf));
    let supervised = mean(runs.supervised.iter().map(ExperimentOutcome::final_mttf));
    check(
        last >= 2.0 * first && last >= 0.9 * supervised,
        format!(
            "PLATO MTTF iteration 1 {first:.2} s -> final {last:.2} s ({:.2}x); supervised final {supervised:.2} s",
            last / first
        ),
    )
}

fn criterion_7() -> Verdict {
    let config = ExperimentConfig::load(config_path("switch.toml")).map_err(|e| e.to_string())?;
    let mut plato = Vec::new();
    let mut dagger = Vec::new();
    for seed in SEEDS {
        plato.push(run(&config, Method::Plato, seed)?.history.total_crashes() as f64);
        let one_zero = ExperimentConfig {
            schedule: BetaSchedule::OneZero,
            ..config.clone()
        };
        dagger.push(run(&one_zero, Method::Dagger, seed)?.history.total_crashes() as f64);
    }
    let (p, d) = (mean(plato), mean(dagger));
    let per_iteration = p / config.iterations as f64;
    check(
        d > p && per_iteration <= 1.5,
        format!("training crashes per run: DAgger one-zero {d:.2}, PLATO {p:.2} ({per_iteration:.2} per iteration)"),
    )
}

fn criterion_8(runs: &ForestRuns) -> Verdict {
    let kl: Vec<f64> = runs
        .plato
        .iter()
        .flat_map(|o| o.history.records.iter().flat_map(|r| r.kl.iter().copied()))
        .collect();
    let exceed = kl.iter().filter(|k| **k > runs.kl_epsilon).count() as f64 / kl.len() as f64;
    check(
        !kl.is_empty() && kl.iter().all(|k| k.is_finite()) && exceed <= 0.05,
        format!(
            "{:.2}% of {} steps exceed ε = {}",
            100.0 * exceed,
            kl.len(),
            runs.kl_epsilon
        ),
    )
}

// ---- 9: determinism and snapshots -------------------------------------------

fn criterion_9() -> Verdict {
    let mut config = ExperimentConfig::load(config_path("forest.toml")).map_err(|e| e.to_string())?;
    config.iterations = 3;
    config.evaluation.episodes = 3;
    let dirs = [tempfile::tempdir(), tempfile::tempdir()];
    let mut csv = Vec::new();
    for dir in &dirs {
        let dir = dir.as_ref().map_err(|e| e.to_string())?.path();
        run_experiment(&config, Some(dir)).map_err(|e| e.to_string())?;
        csv.push(std::fs::read(dir.join("metrics.csv")).map_err(|e| e.to_string())?);
    }
    let identical = csv[0] == csv[1];

    let dir = dirs[0].as_ref().map_err(|e| e.to_string())?.path();
    let mut round_trip = true;
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for i in 1..=config.iterations {
        let path = dir.join(format!("snapshots/iter_{i:03}.json"));
        let loaded = GaussianMlpPolicy::load(&path).map_err(|e| e.to_string())?;
        let again = dir.join(format!("snapshots/resaved_{i:03}.json"));
        loaded.save(&again).map_err(|e| e.to_string())?;
        let reloaded = GaussianMlpPolicy::load(&again).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let o: Vec<f64> = (0..config.observation_dim()).map(|_| rng.random_range(0.0..10.0)).collect();
            let (a, b) = (loaded.mean(&o).unwrap(), reloaded.mean(&o).unwrap());
            round_trip &= a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits());
            round_trip &= format!("{a:?}") == format!("{b:?}");
        }
    }
    check(
        identical && round_trip,
        format!("metrics byte-identical across reruns: {identical}; snapshot forward outputs bit-identical: {round_trip}"),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let forest = forest_runs();
    let from_forest = |f: fn(&ForestRuns) -> Verdict| match &forest {
        Ok(runs) => f(runs),
        Err(e) => Err(e.clone()),
    };
    let results: [(usize, &str, Verdict); 9] = [
        (1, "iLQG matches Riccati gains", criterion_1()),
        (2, "KL matches Monte Carlo", criterion_2()),
        (3, "teacher limit laws", criterion_3()),
        (4, "supervised objective", criterion_4()),
        (5, "PLATO never executes the learner", from_forest(criterion_5)),
        (6, "learning progress on the forest", from_forest(criterion_6)),
        (7, "fewer crashes than DAgger under world switches", criterion_7()),
        (8, "KL threshold exceedance", from_forest(criterion_8)),
        (9, "determinism and snapshot round trip", criterion_9()),
    ];
    let mut failed = 0;
    for (n, name, verdict) in &results {
        match verdict {
            Ok(detail) => println!("criterion {n} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.0} s",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
