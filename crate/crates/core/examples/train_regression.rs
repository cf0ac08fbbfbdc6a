//! Fits the Gaussian MLP policy to labels from a known function with
//! precision-weighted regression, then saves and reloads a snapshot.

use nalgebra::{DMatrix, DVector};
use plato::policy::{
    fit_policy_covariance, train_policy, DemoDataset, DemoRecord, GaussianMlpPolicy, Normalizer,
    TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn target(o: &DVector<f64>) -> DVector<f64> {
    DVector::from_row_slice(&[o[0].sin() + 0.5 * o[1], (o[0] * o[1]).tanh()])
}

fn main() -> plato::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut data = DemoDataset::new();
    for _ in 0..500 {
        let o = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
        let precision = DMatrix::from_diagonal(&DVector::from_row_slice(&[
            rng.random_range(1.0..4.0),
            rng.random_range(1.0..4.0),
        ]));
        data.push(DemoRecord {
            label_mean: target(&o),
            observation: o,
            label_precision: precision,
            sampled_action: None,
        })?;
    }

    let mut policy = GaussianMlpPolicy::new(2, &[32, 32], 2, DMatrix::identity(2, 2), &mut rng)?;
    policy.set_normalizer(Normalizer::fit(&data, 0.0)?)?;
    policy.set_covariance(fit_policy_covariance(&data)?)?;
    let config = TrainConfig {
        epochs: 300,
        ..TrainConfig::default()
    };
    let report = train_policy(&mut policy, &data, &config, &mut rng)?;
    let losses = &report.epoch_losses;
    println!(
        "weighted loss {:.4} after epoch 1, {:.4} after epoch {}",
        losses[0],
        report.final_loss,
        losses.len()
    );
    println!("policy covariance (inverse mean precision):\n{}", policy.covariance());

    let probe = DVector::from_row_slice(&[0.7, -1.1]);
    let dir = std::env::temp_dir().join("plato_train_regression.json");
    policy.save(&dir)?;
    let reloaded = GaussianMlpPolicy::load(&dir)?;
    let (a, b) = (policy.mean(probe.as_slice())?, reloaded.mean(probe.as_slice())?);
    println!(
        "at {:?}: target {:?}, policy {:?}, reloaded identical: {}",
        probe.as_slice(),
        target(&probe).as_slice(),
        a.as_slice(),
        a == b
    );
    Ok(())
}
