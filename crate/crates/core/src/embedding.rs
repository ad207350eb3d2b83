//! Kernel mean embeddings `m(x) = E_{Y~mu} k(x, Y)` of a target.
//!
//! For a Gaussian kernel against a Gaussian mixture every quantity is a
//! Gaussian convolution. With `A_m = Sigma_m + l^2 I`:
//!
//! ```text
//! m(x)      = sum_m w_m det(I + Sigma_m / l^2)^(-1/2) exp(-(x - mu_m)^T A_m^-1 (x - mu_m) / 2)
//! grad m(x) = -sum_m [component term] A_m^-1 (x - mu_m)
//! E k(Y,Y') = sum_{a,b} w_a w_b det(I + (Sigma_a + Sigma_b) / l^2)^(-1/2)
//!             exp(-(mu_a - mu_b)^T (Sigma_a + Sigma_b + l^2 I)^-1 (mu_a - mu_b) / 2)
//! ```
//!
//! Empirical targets use exact averages over the dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelFamily};
use crate::linalg::{add_diagonal, Cholesky};
use crate::points::{check_point, PointSet};
use crate::scalar::{CompensatedSum, Scalar};
use crate::target::{EmpiricalTarget, GaussianMixture, Target};

/// Above this many rows the empirical double integral is estimated from
/// [`DOUBLE_INTEGRAL_PAIRS`] random pairs.
pub const EXACT_DOUBLE_INTEGRAL_MAX_ROWS: usize = 20_000;
pub const DOUBLE_INTEGRAL_PAIRS: usize = 1_000_000;

#[derive(Debug, Clone)]
struct ComponentTerm<T> {
    scale: T,
    mean: Vec<T>,
    /// Cholesky factor of `Sigma_m + l^2 I`.
    chol: Cholesky<T>,
}

/// A kernel paired with a target, with per-component factorizations and the
/// double integral computed once.
#[derive(Debug, Clone)]
pub struct Embedding<'a, T> {
    kernel: Kernel<T>,
    target: &'a Target<T>,
    terms: Vec<ComponentTerm<T>>,
    double_integral: T,
    subsampled: bool,
}

impl<'a, T: Scalar> Embedding<'a, T> {
    pub fn new(kernel: Kernel<T>, target: &'a Target<T>) -> Result<Self> {
        Self::with_seed(kernel, target, 0)
    }

    /// `seed` drives the pair subsample used for large empirical targets.
    pub fn with_seed(kernel: Kernel<T>, target: &'a Target<T>, seed: u64) -> Result<Self> {
        match target {
            Target::Mixture(g) => {
                if kernel.family() != KernelFamily::Gaussian {
                    return Err(Error::Unsupported {
                        kernel: kernel.family().name().to_string(),
                        target: target.kind_name().to_string(),
                        hint: "no closed-form embedding; replace the mixture by an empirical \
                               surrogate of 1e5 draws (see `empirical_surrogate`)",
                    });
                }
                let terms = mixture_terms(&kernel, g)?;
                let double_integral = mixture_double_integral(&kernel, g)?;
                Ok(Self {
                    kernel,
                    target,
                    terms,
                    double_integral,
                    subsampled: false,
                })
            }
            Target::Empirical(e) => {
                let (double_integral, subsampled) = empirical_double_integral(&kernel, e, seed);
                Ok(Self {
                    kernel,
                    target,
                    terms: Vec::new(),
                    double_integral,
                    subsampled,
                })
            }
        }
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    pub fn target(&self) -> &'a Target<T> {
        self.target
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// `E k(Y, Y')` under the target.
    pub fn double_integral(&self) -> T {
        self.double_integral
    }

    /// True when the double integral is a subsampled estimate.
    pub fn double_integral_subsampled(&self) -> bool {
        self.subsampled
    }

    pub fn mean_embedding(&self, x: &[T]) -> Result<T> {
        check_point(x, self.dim())?;
        Ok(self.mean_embedding_raw(x))
    }

    pub fn grad_mean_embedding(&self, x: &[T]) -> Result<Vec<T>> {
        check_point(x, self.dim())?;
        let mut g = vec![T::zero(); x.len()];
        self.add_grad_raw(x, T::one(), &mut g);
        Ok(g)
    }

    pub fn mean_embedding_raw(&self, x: &[T]) -> T {
        match self.target {
            Target::Mixture(_) => {
                let mut acc = CompensatedSum::new();
                let mut w = vec![T::zero(); x.len()];
                for c in &self.terms {
                    for ((wi, xi), mi) in w.iter_mut().zip(x).zip(&c.mean) {
                        *wi = *xi - *mi;
                    }
                    c.chol.solve_lower_in_place(&mut w);
                    let q = w.iter().fold(T::zero(), |s, &a| s + a * a);
                    acc.add(c.scale * (-q / T::of(2.0)).exp());
                }
                acc.value()
            }
            Target::Empirical(e) => {
                let pts = e.points();
                let mut acc = CompensatedSum::new();
                for y in pts.rows() {
                    acc.add(self.kernel.eval_raw(x, y));
                }
                acc.value() / T::of(pts.len() as f64)
            }
        }
    }

    /// Adds `scale * grad m(x)` to `out`.
    pub fn add_grad_raw(&self, x: &[T], scale: T, out: &mut [T]) {
        let d = x.len();
        match self.target {
            Target::Mixture(_) => {
                let mut w = vec![T::zero(); d];
                for c in &self.terms {
                    for ((wi, xi), mi) in w.iter_mut().zip(x).zip(&c.mean) {
                        *wi = *xi - *mi;
                    }
                    c.chol.solve_lower_in_place(&mut w);
                    let q = w.iter().fold(T::zero(), |s, &a| s + a * a);
                    let val = c.scale * (-q / T::of(2.0)).exp();
                    c.chol.solve_upper_in_place(&mut w);
                    for (o, wi) in out.iter_mut().zip(&w) {
                        *o = *o - scale * val * *wi;
                    }
                }
            }
            Target::Empirical(e) => {
                let pts = e.points();
                let mut acc = vec![CompensatedSum::new(); d];
                for y in pts.rows() {
                    let (_, f) = self.kernel.value_and_factor_sq(crate::scalar::sq_dist(x, y));
                    for l in 0..d {
                        acc[l].add(f * (x[l] - y[l]));
                    }
                }
                let inv_n = T::one() / T::of(pts.len() as f64);
                for (o, a) in out.iter_mut().zip(&acc) {
                    *o = *o + scale * a.value() * inv_n;
                }
            }
        }
    }
}

fn mixture_terms<T: Scalar>(kernel: &Kernel<T>, g: &GaussianMixture<T>) -> Result<Vec<ComponentTerm<T>>> {
    let d = g.dim();
    let l2 = kernel.lengthscale() * kernel.lengthscale();
    g.components()
        .iter()
        .map(|c| {
            let chol = Cholesky::factor(&add_diagonal(&c.cov, d, l2), d)?;
            // det(I + Sigma/l^2) = det(Sigma + l^2 I) / l^(2d)
            let log_det = chol.log_det() - T::of(d as f64) * l2.ln();
            Ok(ComponentTerm {
                scale: c.weight * (-log_det / T::of(2.0)).exp(),
                mean: c.mean.clone(),
                chol,
            })
        })
        .collect()
}

fn mixture_double_integral<T: Scalar>(kernel: &Kernel<T>, g: &GaussianMixture<T>) -> Result<T> {
    let d = g.dim();
    let l2 = kernel.lengthscale() * kernel.lengthscale();
    let comps = g.components();
    let mut acc = CompensatedSum::new();
    for a in comps {
        for b in comps {
            let sum: Vec<T> = a.cov.iter().zip(&b.cov).map(|(x, y)| *x + *y).collect();
            let chol = Cholesky::factor(&add_diagonal(&sum, d, l2), d)?;
            let log_det = chol.log_det() - T::of(d as f64) * l2.ln();
            let delta: Vec<T> = a.mean.iter().zip(&b.mean).map(|(x, y)| *x - *y).collect();
            let q = chol.inv_quad(&delta);
            acc.add(a.weight * b.weight * (-(log_det + q) / T::of(2.0)).exp());
        }
    }
    Ok(acc.value())
}

fn empirical_double_integral<T: Scalar>(kernel: &Kernel<T>, e: &EmpiricalTarget<T>, seed: u64) -> (T, bool) {
    let pts = e.points();
    let n = pts.len();
    if n <= EXACT_DOUBLE_INTEGRAL_MAX_ROWS {
        let mut acc = CompensatedSum::new();
        for i in 0..n {
            acc.add(kernel.eval_raw(pts.point(i), pts.point(i)));
            let xi = pts.point(i);
            let mut row = CompensatedSum::new();
            for j in i + 1..n {
                row.add(kernel.eval_raw(xi, pts.point(j)));
            }
            acc.add(row.value() * T::of(2.0));
        }
        (acc.value() / T::of((n * n) as f64), false)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = CompensatedSum::new();
        for _ in 0..DOUBLE_INTEGRAL_PAIRS {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            acc.add(kernel.eval_raw(pts.point(i), pts.point(j)));
        }
        (acc.value() / T::of(DOUBLE_INTEGRAL_PAIRS as f64), true)
    }
}

/// Empirical stand-in for a mixture, for kernels without a closed-form
/// embedding against Gaussians.
pub fn empirical_surrogate<T: Scalar, R: Rng + ?Sized>(
    mixture: &GaussianMixture<T>,
    n: usize,
    rng: &mut R,
) -> Result<EmpiricalTarget<T>> {
    let t = Target::Mixture(mixture.clone());
    Ok(EmpiricalTarget::new(t.sample(n, rng)?))
}

/// Convenience wrapper building a one-off [`Embedding`].
pub fn mean_embedding<T: Scalar>(target: &Target<T>, kernel: &Kernel<T>, x: &[T]) -> Result<T> {
    Embedding::new(*kernel, target)?.mean_embedding(x)
}

pub fn grad_mean_embedding<T: Scalar>(target: &Target<T>, kernel: &Kernel<T>, x: &[T]) -> Result<Vec<T>> {
    Embedding::new(*kernel, target)?.grad_mean_embedding(x)
}

pub fn double_integral<T: Scalar>(target: &Target<T>, kernel: &Kernel<T>) -> Result<T> {
    Ok(Embedding::new(*kernel, target)?.double_integral())
}

/// Rows of `x` as a one-row-per-point dataset target.
pub fn empirical_from(x: &PointSet<f64>) -> Target<f64> {
    Target::Empirical(EmpiricalTarget::new(x.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal(d: usize) -> Target<f64> {
        GaussianMixture::isotropic(d, 1.0).unwrap().into()
    }

    #[test]
    fn standard_normal_closed_forms() {
        let t = std_normal(2);
        let k = Kernel::gaussian(1.0).unwrap();
        let e = Embedding::new(k, &t).unwrap();
        assert!((e.mean_embedding(&[0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((e.double_integral() - 1.0 / 3.0).abs() < 1e-15);
        let g = e.grad_mean_embedding(&[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn one_point_dataset_reduces_to_kernel() {
        let y0 = [0.3, -1.2];
        let t = empirical_from(&PointSet::from_rows(&[y0]).unwrap());
        let x = [1.0, 0.5];
        for k in [
            Kernel::gaussian(0.8).unwrap(),
            Kernel::matern32(1.0).unwrap(),
            Kernel::inverse_multiquadric(1.0, 2.0).unwrap(),
        ] {
            let e = Embedding::new(k, &t).unwrap();
            assert_eq!(e.mean_embedding(&x).unwrap(), k.eval_raw(&x, &y0));
            let g = e.grad_mean_embedding(&x).unwrap();
            let want = k.grad1(&x, &y0).unwrap();
            for (a, b) in g.iter().zip(&want) {
                assert!((a - b).abs() < 1e-16);
            }
            assert_eq!(e.double_integral(), k.eval_raw(&y0, &y0));
        }
    }

    #[test]
    fn long_lengthscale_flattens_embedding() {
        let t: Target<f64> = GaussianMixture::benchmark_2d().into();
        let e = Embedding::new(Kernel::gaussian(1e6).unwrap(), &t).unwrap();
        assert!((e.mean_embedding(&[0.1, 0.2]).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn matern_with_mixture_is_rejected() {
        let t = std_normal(2);
        let err = Embedding::new(Kernel::matern32(1.0).unwrap(), &t).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("matern32") && msg.contains("gaussian-mixture"), "{msg}");
    }

    #[test]
    fn embeddings_bounded_by_kappa() {
        let t: Target<f64> = GaussianMixture::benchmark_2d().into();
        let k = Kernel::gaussian(0.7).unwrap();
        let e = Embedding::new(k, &t).unwrap();
        for x in [[0.0, 0.0], [5.0, -3.0], [-2.1, 1.6]] {
            let m = e.mean_embedding(&x).unwrap();
            assert!(m > 0.0 && m <= k.kappa_bound());
        }
        assert!(e.double_integral() <= k.kappa_bound());
    }

    #[test]
    fn shuffled_dataset_gives_same_embedding() {
        let rows: Vec<[f64; 2]> = (0..200)
            .map(|i| {
                let f = i as f64;
                [(f * 0.37).sin() * 2.0, (f * 0.11).cos()]
            })
            .collect();
        let p = PointSet::from_rows(&rows).unwrap();
        let perm: Vec<usize> = (0..200).map(|i| (i * 77) % 200).collect();
        let t1 = empirical_from(&p);
        let t2 = empirical_from(&p.permuted(&perm));
        let k = Kernel::matern32(1.0).unwrap();
        let (e1, e2) = (Embedding::new(k, &t1).unwrap(), Embedding::new(k, &t2).unwrap());
        let x = [0.3, 0.1];
        assert!((e1.mean_embedding(&x).unwrap() - e2.mean_embedding(&x).unwrap()).abs() <= 1e-12);
        assert!((e1.double_integral() - e2.double_integral()).abs() <= 1e-12);
        let (g1, g2) = (e1.grad_mean_embedding(&x).unwrap(), e2.grad_mean_embedding(&x).unwrap());
        assert!(g1.iter().zip(&g2).all(|(a, b)| (a - b).abs() <= 1e-12));
    }
}
