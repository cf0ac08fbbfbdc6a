//! Closed-form KL between two Gaussians, checked against a sampled estimate.

use nalgebra::{DMatrix, DVector};
use plato::gaussian::{kl_divergence, Gaussian};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn log_density(g: &Gaussian, x: &DVector<f64>) -> f64 {
    let cov = g.covariance();
    let r = x - g.mean();
    let quad = r.dot(&(cov.clone().try_inverse().unwrap() * &r));
    -0.5 * (g.dim() as f64 * (2.0 * std::f64::consts::PI).ln() + cov.determinant().ln() + quad)
}

fn main() -> plato::Result<()> {
    let p = Gaussian::new(
        DVector::from_row_slice(&[0.5, -0.2]),
        DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.3]),
    )?;
    let q = Gaussian::isotropic(DVector::zeros(2), 1.0)?;
    let exact = kl_divergence(&p, &q)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let x = p.sample(&mut rng)?;
        sum += log_density(&p, &x) - log_density(&q, &x);
    }
    println!("KL(p || q) closed form {exact:.5}, Monte Carlo {:.5}", sum / n as f64);
    println!("KL(q || p) = {:.5}", kl_divergence(&q, &p)?);
    Ok(())
}
