#![allow(dead_code)]

use mmdpoints_core::{GaussianMixture, PointSet, Target};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random SPD matrix `L L^T + 0.2 I` with entries of `L` in [-0.6, 0.6].
pub fn random_cov<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    let l: Vec<f64> = (0..d * d).map(|_| rng.random_range(-0.6..0.6)).collect();
    let mut c = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            c[i * d + j] = (0..d).map(|k| l[i * d + k] * l[j * d + k]).sum::<f64>();
        }
        c[i * d + i] += 0.2;
    }
    c
}

pub fn random_mixture<R: Rng>(rng: &mut R, d: usize, components: usize) -> GaussianMixture<f64> {
    let raw: Vec<f64> = (0..components).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let rest: f64 = weights[1..].iter().sum();
    weights[0] = 1.0 - rest;
    let means = (0..components)
        .map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let covs = (0..components).map(|_| random_cov(rng, d)).collect();
    GaussianMixture::new(weights, means, covs).unwrap()
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, d: usize, spread: f64) -> PointSet<f64> {
    let data = (0..n * d).map(|_| rng.random_range(-spread..spread)).collect();
    PointSet::new(data, d).unwrap()
}

pub fn benchmark() -> Target<f64> {
    GaussianMixture::benchmark_2d().into()
}

/// Sample mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn assert_within_se(name: &str, exact: f64, values: &[f64], k: f64) {
    let (mean, se) = mean_se(values);
    assert!(
        (exact - mean).abs() <= k * se + 1e-12,
        "{name}: closed form {exact} vs Monte Carlo {mean} (se {se})"
    );
}
