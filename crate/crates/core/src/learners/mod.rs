//! Training loops: PLATO and the comparison methods (DAgger, DAgger with
//! coaching, and plain supervised learning from the MPC supervisor).
//!
//! All methods share one reset-free rollout loop. They differ only in which
//! policy executes each step and which policy labels it:
//!
//! | method     | executes                    | labels |
//! |------------|-----------------------------|--------|
//! | plato      | `π_λ` (teacher)             | `π*`   |
//! | dagger     | `β π* + (1 − β) π_θ`        | `π*`   |
//! | coaching   | `β π* + (1 − β) π_θ`        | `π_λ`  |
//! | supervised | `π*`                        | `π*`   |

mod run;
mod schedule;
pub(crate) mod streams;

use serde::{Deserialize, Serialize};

use crate::env::FieldKind;
use crate::policy::{DemoDataset, GaussianMlpPolicy};

pub use run::{run_coaching, run_dagger, run_method, run_plato, run_supervised};
pub use schedule::{beta_value, BetaSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Plato,
    Dagger,
    Coaching,
    Supervised,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Plato, Method::Dagger, Method::Coaching, Method::Supervised];

    pub fn name(self) -> &'static str {
        match self {
            Method::Plato => "plato",
            Method::Dagger => "dagger",
            Method::Coaching => "coaching",
            Method::Supervised => "supervised",
        }
    }

    /// Whether the learner's own actions may be executed during training.
    pub fn executes_learner(self) -> bool {
        matches!(self, Method::Dagger | Method::Coaching)
    }
}

/// Which policy produced an executed action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionSource {
    /// The adaptive teacher `π_λ`.
    Teacher,
    /// The MPC supervisor `π*`.
    Supervisor,
    /// The learner `π_θ`.
    Learner,
    /// The previous plan, time-shifted, after a planner failure.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProvenanceEntry {
    pub iteration: usize,
    pub step: usize,
    pub source: ActionSource,
}

/// Statistics of one training iteration (rollout plus retraining).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub world: FieldKind,
    pub beta: f64,
    /// Dataset size after this iteration's aggregation.
    pub dataset_size: usize,
    pub training_crashes: usize,
    pub planner_faults: usize,
    /// Executed actions that came from the learner.
    pub learner_actions: usize,
    /// Learner evaluations during the rollout, executed or not.
    pub learner_queries: usize,
    /// Mean task cost of the executed steps.
    pub mean_stage_cost: f64,
    /// Realized `KL(π_λ ‖ π_θ)` at every step where the teacher planned.
    pub kl: Vec<f64>,
    /// Final training loss; `None` while the dataset is empty.
    pub train_loss: Option<f64>,
}

impl IterationRecord {
    pub fn mean_kl(&self) -> Option<f64> {
        if self.kl.is_empty() {
            None
        } else {
            Some(self.kl.iter().sum::<f64>() / self.kl.len() as f64)
        }
    }

    /// Fraction of logged steps whose KL exceeds `epsilon`.
    pub fn kl_exceed_fraction(&self, epsilon: f64) -> Option<f64> {
        if self.kl.is_empty() {
            None
        } else {
            Some(self.kl.iter().filter(|k| **k > epsilon).count() as f64 / self.kl.len() as f64)
        }
    }
}

/// Everything a training run produced.
#[derive(Debug, Clone)]
pub struct RunHistory {
    pub method: Method,
    pub records: Vec<IterationRecord>,
    /// `policies[0]` is the initial policy and `policies[i]` the one trained
    /// after iteration `i`.
    pub policies: Vec<GaussianMlpPolicy>,
    pub dataset: DemoDataset,
    pub provenance: Vec<ProvenanceEntry>,
}

/// Seed of the world generated when training reaches `iteration` with a new
/// world kind.
pub fn field_seed(master_seed: u64, iteration: usize) -> u64 {
    streams::derived_seed(master_seed, streams::Stream::Field, iteration as u64)
}

impl RunHistory {
    pub fn final_policy(&self) -> &GaussianMlpPolicy {
        &self.policies[self.policies.len() - 1]
    }

    pub fn total_crashes(&self) -> usize {
        self.records.iter().map(|r| r.training_crashes).sum()
    }

    pub fn learner_executed_actions(&self) -> usize {
        self.provenance
            .iter()
            .filter(|p| p.source == ActionSource::Learner)
            .count()
    }
}
