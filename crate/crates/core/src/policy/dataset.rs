use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One supervision record: an observation and the supervisor's action
/// distribution, stored as mean and precision.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoRecord {
    pub observation: DVector<f64>,
    pub label_mean: DVector<f64>,
    pub label_precision: DMatrix<f64>,
    /// The action sampled from the label distribution, kept for ablations.
    pub sampled_action: Option<DVector<f64>>,
}

/// Append-only aggregate of supervision records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DemoDataset {
    records: Vec<DemoRecord>,
}

impl DemoDataset {
    pub fn new() -> Self {
        DemoDataset::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[DemoRecord] {
        &self.records
    }

    pub fn observation_dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.observation.len())
    }

    pub fn action_dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.label_mean.len())
    }

    /// Appends a record after checking dimensions against earlier records and
    /// that the precision is symmetric positive definite.
    pub fn push(&mut self, record: DemoRecord) -> Result<()> {
        let m = record.label_mean.len();
        if let (Some(o), Some(a)) = (self.observation_dim(), self.action_dim()) {
            if record.observation.len() != o {
                return Err(Error::DimensionMismatch {
                    context: "dataset observation",
                    expected: o,
                    found: record.observation.len(),
                });
            }
            if m != a {
                return Err(Error::DimensionMismatch {
                    context: "dataset label",
                    expected: a,
                    found: m,
                });
            }
        }
        let p = &record.label_precision;
        if p.nrows() != m || p.ncols() != m {
            return Err(Error::DimensionMismatch {
                context: "dataset label precision",
                expected: m,
                found: p.nrows(),
            });
        }
        let finite = record
            .observation
            .iter()
            .chain(record.label_mean.iter())
            .chain(p.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("dataset records must be finite".into()));
        }
        let asym = (p - p.transpose()).amax();
        if asym > 1e-9 * p.amax() || p.clone().cholesky().is_none() {
            return Err(Error::InvalidParameter(
                "label precision must be symmetric positive definite".into(),
            ));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = DemoRecord>) -> Result<()> {
        for r in records {
            self.push(r)?;
        }
        Ok(())
    }
}
