//! Multivariate Gaussians for the action distributions of the MPC teacher and
//! the learner, with the KL divergence that couples them.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative eigenvalue floor: every eigenvalue must be at least this times
/// `trace / d`.
const EIGEN_FLOOR: f64 = 1e-10;

/// A multivariate normal with a dense, symmetric positive-definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl Gaussian {
    /// Builds a Gaussian, symmetrizing the covariance as `(S + Sᵀ)/2`.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "Gaussian::new",
                expected: d,
                found: covariance.nrows().max(covariance.ncols()),
            });
        }
        if d == 0 {
            return Err(Error::InvalidParameter("zero-dimensional Gaussian".into()));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Gaussian parameter".into()));
        }
        let covariance = symmetrize(&covariance);
        let eig = covariance.clone().symmetric_eigen();
        let min = eig.eigenvalues.min();
        let floor = EIGEN_FLOOR * covariance.trace() / d as f64;
        if min <= 0.0 || min < floor {
            return Err(Error::numerical(
                "Gaussian covariance is not positive definite",
                condition_from_eigenvalues(eig.eigenvalues.as_slice()),
            ));
        }
        Ok(Gaussian { mean, covariance })
    }

    pub fn isotropic(mean: DVector<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        Gaussian::new(mean, DMatrix::identity(d, d) * variance)
    }

    /// Builds a Gaussian from its mean and precision (inverse covariance).
    pub fn from_precision(mean: DVector<f64>, precision: &DMatrix<f64>) -> Result<Self> {
        let cov = spd_inverse(precision, "Gaussian::from_precision")?;
        Gaussian::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> Result<DMatrix<f64>> {
        spd_inverse(&self.covariance, "Gaussian::precision")
    }

    /// Affine pushforward `A x + b`.
    pub fn affine(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Gaussian> {
        Gaussian::new(a * &self.mean + b, a * &self.covariance * a.transpose())
    }

    fn cholesky(&self, context: &str) -> Result<Cholesky<f64, Dyn>> {
        self.covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::numerical(context.to_string(), condition_number(&self.covariance)))
    }

    /// Draws `μ + L z` with `L Lᵀ = Σ` and `z ~ N(0, I)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        sample(self, rng)
    }
}

/// `KL(p ‖ q)` in nats.
pub fn kl_divergence(p: &Gaussian, q: &Gaussian) -> Result<f64> {
    let d = p.dim();
    if q.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "kl_divergence",
            expected: d,
            found: q.dim(),
        });
    }
    let chol_q = q.cholesky("kl_divergence: q covariance")?;
    let chol_p = p.cholesky("kl_divergence: p covariance")?;

    let log_det_q = log_det(&chol_q);
    let log_det_p = log_det(&chol_p);
    let trace = chol_q.solve(&p.covariance).trace();
    let diff = &q.mean - &p.mean;
    let mahalanobis = diff.dot(&chol_q.solve(&diff));

    Ok(0.5 * (log_det_q - log_det_p + trace + mahalanobis - d as f64))
}

pub fn sample<R: Rng + ?Sized>(g: &Gaussian, rng: &mut R) -> Result<DVector<f64>> {
    let chol = g.cholesky("Gaussian::sample")?;
    let z = DVector::from_iterator(g.dim(), (0..g.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)));
    Ok(&g.mean + chol.l() * z)
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = symmetrize(m).symmetric_eigen();
    condition_from_eigenvalues(eig.eigenvalues.as_slice())
}

fn condition_from_eigenvalues(values: &[f64]) -> f64 {
    let max = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let min = values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub(crate) fn spd_inverse(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let chol = symmetrize(m)
        .cholesky()
        .ok_or_else(|| Error::numerical(context.to_string(), condition_number(m)))?;
    Ok(symmetrize(&chol.inverse()))
}
