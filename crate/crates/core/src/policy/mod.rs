//! The learner `π_θ(u|o) = N(μ_θ(o), Σ_θ)`: a ReLU network for the mean with
//! a state-independent covariance, trained by weighted least squares on
//! supervisor label distributions.

mod dataset;
mod snapshot;
mod train;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::{Error, Result};
use crate::gaussian::{symmetrize, Gaussian};

pub use dataset::{DemoDataset, DemoRecord};
pub use snapshot::PolicySnapshot;
pub use train::{
    fit_policy_covariance, loss_and_gradient, train_policy, weighted_loss, TrainConfig, TrainReport,
};

/// One fully connected layer, `z = W a + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Affine standardization `(o − mean) / scale` applied before the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: DVector<f64>,
    pub scale: DVector<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer {
            mean: DVector::zeros(dim),
            scale: DVector::from_element(dim, 1.0),
        }
    }

    /// Per-dimension mean and standard deviation of the dataset's
    /// observations, with each scale floored at `min_scale`. Dimensions whose
    /// floored scale is still zero keep unit scale.
    pub fn fit(data: &DemoDataset, min_scale: f64) -> Result<Self> {
        if !(min_scale >= 0.0 && min_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid normalizer floor {min_scale}")));
        }
        let dim = data.observation_dim().ok_or_else(|| {
            Error::InvalidParameter("cannot fit a normalizer to an empty dataset".into())
        })?;
        let n = data.len() as f64;
        let mut mean = DVector::zeros(dim);
        for r in data.records() {
            mean += &r.observation;
        }
        mean /= n;
        let mut var = DVector::zeros(dim);
        for r in data.records() {
            let d = &r.observation - &mean;
            var += d.component_mul(&d);
        }
        var /= n;
        let scale = var.map(|v| {
            let s = v.sqrt().max(min_scale);
            if s > 1e-8 { s } else { 1.0 }
        });
        Ok(Normalizer { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, o: &DVector<f64>) -> DVector<f64> {
        (o - &self.mean).component_div(&self.scale)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.scale.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                context: "normalizer scale",
                expected: self.mean.len(),
                found: self.scale.len(),
            });
        }
        if self.mean.iter().any(|v| !v.is_finite()) || self.scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter("normalizer must be finite with positive scale".into()));
        }
        Ok(())
    }
}

/// Architecture and training settings of the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    /// Hidden layer widths; empty gives a linear model.
    pub hidden_layers: Vec<usize>,
    /// Diagonal of the covariance before any data has been seen.
    pub initial_variance: f64,
    /// When set, the covariance stays at `initial_variance · I` instead of
    /// being refitted from the label precisions each iteration.
    pub fixed_covariance: bool,
    /// Lower bound on the input normalizer's per-dimension scale, in
    /// observation units. Keeps channels that barely varied in the data so
    /// far (e.g. beams that never saw an obstacle) from being amplified.
    pub normalizer_min_scale: f64,
    pub train: TrainConfig,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            hidden_layers: vec![40, 40],
            initial_variance: 1.0,
            fixed_covariance: false,
            normalizer_min_scale: 1.0,
            train: TrainConfig::default(),
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.contains(&0) {
            return Err(Error::InvalidParameter("hidden layers must be nonempty".into()));
        }
        if !(self.initial_variance > 0.0 && self.initial_variance.is_finite()) {
            return Err(Error::InvalidParameter("initial_variance must be positive".into()));
        }
        if !(self.normalizer_min_scale >= 0.0 && self.normalizer_min_scale.is_finite()) {
            return Err(Error::InvalidParameter("normalizer_min_scale must be nonnegative".into()));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMlpPolicy {
    layers: Vec<Layer>,
    normalizer: Normalizer,
    covariance: DMatrix<f64>,
}

fn check_covariance(covariance: &DMatrix<f64>, dim: usize) -> Result<DMatrix<f64>> {
    if covariance.nrows() != dim || covariance.ncols() != dim {
        return Err(Error::DimensionMismatch {
            context: "policy covariance",
            expected: dim,
            found: covariance.nrows(),
        });
    }
    // Gaussian::new performs the SPD and conditioning checks.
    let g = Gaussian::new(DVector::zeros(dim), symmetrize(covariance))?;
    Ok(g.covariance().clone())
}

impl GaussianMlpPolicy {
    /// Random initialization: weights uniform in `±1/√fan_in`, zero biases.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        covariance: DMatrix<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        for &width in hidden.iter().chain(std::iter::once(&output_dim)) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = DMatrix::from_fn(width, fan_in, |_, _| rng.random_range(-bound..bound));
            layers.push(Layer {
                weights,
                bias: DVector::zeros(width),
            });
            fan_in = width;
        }
        Self::from_parts(layers, Normalizer::identity(input_dim), covariance)
    }

    /// All weights and biases zero.
    pub fn zeros(input_dim: usize, hidden: &[usize], output_dim: usize, covariance: DMatrix<f64>) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        for &width in hidden.iter().chain(std::iter::once(&output_dim)) {
            layers.push(Layer {
                weights: DMatrix::zeros(width, fan_in),
                bias: DVector::zeros(width),
            });
            fan_in = width;
        }
        Self::from_parts(layers, Normalizer::identity(input_dim), covariance)
    }

    pub fn from_parts(layers: Vec<Layer>, normalizer: Normalizer, covariance: DMatrix<f64>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("a policy needs at least one layer".into()));
        }
        normalizer.validate()?;
        let mut fan_in = normalizer.dim();
        for layer in &layers {
            if layer.input_dim() != fan_in {
                return Err(Error::DimensionMismatch {
                    context: "policy layer input",
                    expected: fan_in,
                    found: layer.input_dim(),
                });
            }
            if layer.bias.len() != layer.output_dim() {
                return Err(Error::DimensionMismatch {
                    context: "policy layer bias",
                    expected: layer.output_dim(),
                    found: layer.bias.len(),
                });
            }
            if layer.weights.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("policy parameters must be finite".into()));
            }
            fan_in = layer.output_dim();
        }
        let covariance = check_covariance(&covariance, fan_in)?;
        Ok(GaussianMlpPolicy {
            layers,
            normalizer,
            covariance,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.normalizer.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn set_normalizer(&mut self, normalizer: Normalizer) -> Result<()> {
        normalizer.validate()?;
        if normalizer.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "set_normalizer",
                expected: self.input_dim(),
                found: normalizer.dim(),
            });
        }
        self.normalizer = normalizer;
        Ok(())
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn set_covariance(&mut self, covariance: DMatrix<f64>) -> Result<()> {
        self.covariance = check_covariance(&covariance, self.output_dim())?;
        Ok(())
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "policy input",
                expected: self.input_dim(),
                found: len,
            });
        }
        Ok(())
    }

    /// Network output `μ_θ(o)` for a raw (unnormalized) observation vector.
    pub fn mean(&self, o: &[f64]) -> Result<DVector<f64>> {
        self.check_input(o.len())?;
        let mut a = self.normalizer.apply(&DVector::from_column_slice(o));
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            a = &layer.weights * a + &layer.bias;
            if l < last {
                a.apply(|v| *v = v.max(0.0));
            }
        }
        Ok(a)
    }

    pub fn forward_vector(&self, o: &[f64]) -> Result<Gaussian> {
        Gaussian::new(self.mean(o)?, self.covariance.clone())
    }

    /// `N(μ_θ(o), Σ_θ)`.
    pub fn forward(&self, o: &Observation) -> Result<Gaussian> {
        self.forward_vector(&o.to_vector())
    }

    /// Batched forward pass on normalized inputs (one sample per column).
    /// Returns the input to every layer followed by the output.
    pub(crate) fn forward_batch(&self, x: DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x);
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * &acts[l];
            for mut col in z.column_iter_mut() {
                col += &layer.bias;
            }
            if l < last {
                z.apply(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flattened parameters: per layer, weights in column-major order then
    /// biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            p.extend(l.weights.iter());
            p.extend(l.bias.iter());
        }
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                context: "set_parameters",
                expected: self.parameter_count(),
                found: p.len(),
            });
        }
        let mut i = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = p[i];
                i += 1;
            }
        }
        Ok(())
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }
}

/// `N(μ_θ(o), Σ_θ)` for an observation.
pub fn policy_forward(policy: &GaussianMlpPolicy, o: &Observation) -> Result<Gaussian> {
    policy.forward(o)
}
