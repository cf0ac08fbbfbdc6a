use nalgebra::{DMatrix, DVector};
use plato::gaussian::{kl_divergence, Gaussian};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Gaussian {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.5;
    let mean = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    Gaussian::new(mean, cov).unwrap()
}

/// Log density through the determinant and explicit inverse.
fn log_density(g: &Gaussian, x: &DVector<f64>) -> f64 {
    let d = g.dim() as f64;
    let cov = g.covariance();
    let inv = cov.clone().try_inverse().unwrap();
    let r = x - g.mean();
    -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + cov.determinant().ln() + r.dot(&(&inv * &r)))
}

/// Mean and standard error of `log p(x) - log q(x)` for `x ~ p`.
fn monte_carlo_kl(p: &Gaussian, q: &Gaussian, n: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let x = p.sample(rng).unwrap();
        let v = log_density(p, &x) - log_density(q, &x);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

#[test]
fn kl_matches_monte_carlo_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for pair in 0..8 {
        let d = 1 + pair % 4;
        let p = random_gaussian(&mut rng, d);
        let q = random_gaussian(&mut rng, d);
        let exact = kl_divergence(&p, &q).unwrap();
        let (estimate, se) = monte_carlo_kl(&p, &q, 40_000, &mut rng);
        assert!(
            (exact - estimate).abs() <= 4.0 * se,
            "d = {d}: closed form {exact}, estimate {estimate} ± {se}"
        );
    }
}

#[test]
fn diagonal_kl_is_the_sum_of_scalar_kls() {
    let mp = [0.3, -1.0, 2.0];
    let vp = [0.5, 2.0, 1.5];
    let mq = [0.0, 0.5, 1.0];
    let vq = [1.0, 0.7, 3.0];
    let p = Gaussian::new(DVector::from_row_slice(&mp), DMatrix::from_diagonal(&DVector::from_row_slice(&vp))).unwrap();
    let q = Gaussian::new(DVector::from_row_slice(&mq), DMatrix::from_diagonal(&DVector::from_row_slice(&vq))).unwrap();
    let expected: f64 = (0..3)
        .map(|i| 0.5 * (vp[i] / vq[i] + (mq[i] - mp[i]).powi(2) / vq[i] - 1.0 + (vq[i] / vp[i]).ln()))
        .sum();
    assert!((kl_divergence(&p, &q).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn kl_is_asymmetric() {
    let p = Gaussian::isotropic(DVector::zeros(1), 1.0).unwrap();
    let q = Gaussian::isotropic(DVector::from_element(1, 1.0), 4.0).unwrap();
    let pq = kl_divergence(&p, &q).unwrap();
    let qp = kl_divergence(&q, &p).unwrap();
    assert!((pq - qp).abs() > 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kl_is_nonnegative_and_zero_on_itself(seed in any::<u64>(), d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_gaussian(&mut rng, d);
        let q = random_gaussian(&mut rng, d);
        prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-9);
    }

    #[test]
    fn kl_is_invariant_under_invertible_affine_maps(seed in any::<u64>(), d in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_gaussian(&mut rng, d);
        let q = random_gaussian(&mut rng, d);
        // Well-conditioned: identity plus a small perturbation.
        let a = DMatrix::identity(d, d)
            + DMatrix::from_fn(d, d, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal) / d as f64);
        let b = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let before = kl_divergence(&p, &q).unwrap();
        let after = kl_divergence(&p.affine(&a, &b).unwrap(), &q.affine(&a, &b).unwrap()).unwrap();
        prop_assert!((before - after).abs() <= 1e-8 * (1.0 + before), "{} vs {}", before, after);
    }
}
