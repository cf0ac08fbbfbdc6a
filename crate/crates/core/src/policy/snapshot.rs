//! Policy persistence as JSON. Floats are written in shortest round-trip
//! form, so a reloaded policy is bit-identical to the saved one.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{GaussianMlpPolicy, Layer, Normalizer};
use crate::error::{Error, Result};

const FORMAT: &str = "plato-policy/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    /// Row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Serialized form of a [`GaussianMlpPolicy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySnapshot {
    format: String,
    input_dim: usize,
    output_dim: usize,
    layers: Vec<LayerRecord>,
    /// Row-major, `output_dim × output_dim`.
    covariance: Vec<f64>,
    normalizer_mean: Vec<f64>,
    normalizer_scale: Vec<f64>,
}

impl PolicySnapshot {
    pub fn from_policy(policy: &GaussianMlpPolicy) -> Self {
        let row_major = |m: &DMatrix<f64>| m.transpose().iter().copied().collect::<Vec<_>>();
        PolicySnapshot {
            format: FORMAT.to_string(),
            input_dim: policy.input_dim(),
            output_dim: policy.output_dim(),
            layers: policy
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    rows: l.output_dim(),
                    cols: l.input_dim(),
                    weights: row_major(&l.weights),
                    bias: l.bias.iter().copied().collect(),
                })
                .collect(),
            covariance: row_major(policy.covariance()),
            normalizer_mean: policy.normalizer().mean.iter().copied().collect(),
            normalizer_scale: policy.normalizer().scale.iter().copied().collect(),
        }
    }

    pub fn to_policy(&self) -> Result<GaussianMlpPolicy> {
        if self.format != FORMAT {
            return Err(Error::Snapshot(format!("unsupported snapshot format {:?}", self.format)));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(Error::Snapshot(format!("layer {i} has inconsistent shape")));
            }
            layers.push(Layer {
                weights: DMatrix::from_row_slice(l.rows, l.cols, &l.weights),
                bias: DVector::from_column_slice(&l.bias),
            });
        }
        let m = self.output_dim;
        if self.covariance.len() != m * m {
            return Err(Error::Snapshot("covariance has inconsistent shape".into()));
        }
        let normalizer = Normalizer {
            mean: DVector::from_column_slice(&self.normalizer_mean),
            scale: DVector::from_column_slice(&self.normalizer_scale),
        };
        if normalizer.dim() != self.input_dim {
            return Err(Error::Snapshot("normalizer has inconsistent shape".into()));
        }
        let policy = GaussianMlpPolicy::from_parts(
            layers,
            normalizer,
            DMatrix::from_row_slice(m, m, &self.covariance),
        )
        .map_err(|e| Error::Snapshot(e.to_string()))?;
        if policy.output_dim() != m {
            return Err(Error::Snapshot("output dimension does not match layers".into()));
        }
        Ok(policy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot fields always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Snapshot(e.to_string()))
    }
}

impl GaussianMlpPolicy {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, PolicySnapshot::from_policy(self).to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        PolicySnapshot::from_json(&std::fs::read_to_string(path)?)?.to_policy()
    }
}
