//! Weighted least-squares training with Adam.
//!
//! The per-sample loss is `(μ_θ(o) − μ*)ᵀ P* (μ_θ(o) − μ*)` where `P*` is the
//! label precision; the reported loss is its mean over samples.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DemoDataset, GaussianMlpPolicy};
use crate::error::{Error, Result};
use crate::gaussian::spd_inverse;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 200,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "learning_rate must be positive and batch_size at least 1".into(),
            ));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("invalid Adam moments: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-sample loss on the whole dataset after training.
    pub final_loss: f64,
    /// Mean minibatch loss during each epoch.
    pub epoch_losses: Vec<f64>,
}

type LayerGrads = Vec<(DMatrix<f64>, DVector<f64>)>;

struct Prepared<'a> {
    inputs: DMatrix<f64>,
    targets: DMatrix<f64>,
    precisions: Vec<&'a DMatrix<f64>>,
}

fn prepare<'a>(policy: &GaussianMlpPolicy, data: &'a DemoDataset) -> Result<Prepared<'a>> {
    let (Some(o), Some(a)) = (data.observation_dim(), data.action_dim()) else {
        return Err(Error::InvalidParameter("training requires a nonempty dataset".into()));
    };
    if o != policy.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "training observations",
            expected: policy.input_dim(),
            found: o,
        });
    }
    if a != policy.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "training labels",
            expected: policy.output_dim(),
            found: a,
        });
    }
    let records = data.records();
    let normalizer = policy.normalizer();
    let mut inputs = DMatrix::zeros(o, records.len());
    let mut targets = DMatrix::zeros(a, records.len());
    for (j, r) in records.iter().enumerate() {
        inputs.set_column(j, &normalizer.apply(&r.observation));
        targets.set_column(j, &r.label_mean);
    }
    Ok(Prepared {
        inputs,
        targets,
        precisions: records.iter().map(|r| &r.label_precision).collect(),
    })
}

/// Mean loss and per-layer gradients on the samples in `cols`.
fn batch_loss_gradient(policy: &GaussianMlpPolicy, data: &Prepared<'_>, cols: &[usize]) -> (f64, LayerGrads) {
    let acts = policy.forward_batch(data.inputs.select_columns(cols.iter()));
    let out = &acts[acts.len() - 1];
    let n = cols.len() as f64;
    let mut delta = DMatrix::zeros(out.nrows(), out.ncols());
    let mut loss = 0.0;
    for (k, &j) in cols.iter().enumerate() {
        let diff = out.column(k) - data.targets.column(j);
        let weighted = data.precisions[j] * &diff;
        loss += diff.dot(&weighted);
        delta.set_column(k, &(weighted * (2.0 / n)));
    }
    let layers = policy.layers();
    let mut grads: LayerGrads = Vec::with_capacity(layers.len());
    for l in (0..layers.len()).rev() {
        let dw = &delta * acts[l].transpose();
        let db = delta.column_sum();
        if l > 0 {
            let mut back = layers[l].weights.transpose() * &delta;
            back.zip_apply(&acts[l], |g, a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            });
            delta = back;
        }
        grads.push((dw, db));
    }
    grads.reverse();
    (loss / n, grads)
}

/// Mean per-sample weighted loss over the whole dataset.
pub fn weighted_loss(policy: &GaussianMlpPolicy, data: &DemoDataset) -> Result<f64> {
    let prepared = prepare(policy, data)?;
    let cols: Vec<usize> = (0..data.len()).collect();
    Ok(batch_loss_gradient(policy, &prepared, &cols).0)
}

/// Loss over the whole dataset and its gradient, flattened in the order of
/// [`GaussianMlpPolicy::parameters`].
pub fn loss_and_gradient(policy: &GaussianMlpPolicy, data: &DemoDataset) -> Result<(f64, Vec<f64>)> {
    let prepared = prepare(policy, data)?;
    let cols: Vec<usize> = (0..data.len()).collect();
    let (loss, grads) = batch_loss_gradient(policy, &prepared, &cols);
    let mut flat = Vec::with_capacity(policy.parameter_count());
    for (dw, db) in grads {
        flat.extend(dw.iter());
        flat.extend(db.iter());
    }
    Ok((loss, flat))
}

/// Minibatch Adam on the weighted loss, starting from the policy's current
/// parameters. Optimizer moments start fresh on every call.
pub fn train_policy<R: Rng + ?Sized>(
    policy: &mut GaussianMlpPolicy,
    data: &DemoDataset,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport> {
    config.validate()?;
    let prepared = prepare(policy, data)?;
    let mut first: LayerGrads = policy
        .layers()
        .iter()
        .map(|l| (DMatrix::zeros(l.output_dim(), l.input_dim()), DVector::zeros(l.output_dim())))
        .collect();
    let mut second = first.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step = 0i32;

    for _ in 0..config.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for cols in order.chunks(config.batch_size) {
            let (loss, grads) = batch_loss_gradient(policy, &prepared, cols);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { loss });
            }
            total += loss * cols.len() as f64;
            step += 1;
            let c1 = 1.0 - config.beta1.powi(step);
            let c2 = 1.0 - config.beta2.powi(step);
            let lr = config.learning_rate;
            for ((layer, (gw, gb)), ((mw, mb), (vw, vb))) in policy
                .layers_mut()
                .iter_mut()
                .zip(grads)
                .zip(first.iter_mut().zip(second.iter_mut()))
            {
                let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = config.beta1 * *m + (1.0 - config.beta1) * g;
                    *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + config.epsilon);
                };
                for (((p, g), m), v) in layer.weights.iter_mut().zip(gw.iter()).zip(mw.iter_mut()).zip(vw.iter_mut()) {
                    update(p, *g, m, v);
                }
                for (((p, g), m), v) in layer.bias.iter_mut().zip(gb.iter()).zip(mb.iter_mut()).zip(vb.iter_mut()) {
                    update(p, *g, m, v);
                }
            }
        }
        epoch_losses.push(total / data.len() as f64);
    }

    let cols: Vec<usize> = (0..data.len()).collect();
    let final_loss = batch_loss_gradient(policy, &prepared, &cols).0;
    if !final_loss.is_finite() {
        return Err(Error::TrainingDiverged { loss: final_loss });
    }
    Ok(TrainReport {
        final_loss,
        epoch_losses,
    })
}

/// `(mean of label precisions)⁻¹`, the covariance minimizing the summed KL
/// from the labels for a state-independent learner covariance.
pub fn fit_policy_covariance(data: &DemoDataset) -> Result<DMatrix<f64>> {
    let Some(a) = data.action_dim() else {
        return Err(Error::InvalidParameter("cannot fit a covariance to an empty dataset".into()));
    };
    let mut sum = DMatrix::zeros(a, a);
    for r in data.records() {
        sum += &r.label_precision;
    }
    spd_inverse(&(sum / data.len() as f64), "fit_policy_covariance")
}
