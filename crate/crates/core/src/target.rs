//! Target distributions: Gaussian mixtures and empirical datasets.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::Cholesky;
use crate::points::PointSet;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent<T> {
    pub weight: T,
    pub mean: Vec<T>,
    /// Row-major `d x d` covariance.
    pub cov: Vec<T>,
    pub(crate) chol: Cholesky<T>,
}

impl<T: Scalar> MixtureComponent<T> {
    pub fn cov_cholesky(&self) -> &Cholesky<T> {
        &self.chol
    }
}

/// Finite mixture of Gaussians `sum_m w_m N(mu_m, Sigma_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture<T> {
    dim: usize,
    components: Vec<MixtureComponent<T>>,
    cumulative: Vec<T>,
}

impl<T: Scalar> GaussianMixture<T> {
    pub fn new(weights: Vec<T>, means: Vec<Vec<T>>, covs: Vec<Vec<T>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty { what: "mixture" });
        }
        if means.len() != weights.len() || covs.len() != weights.len() {
            return Err(invalid(
                "mixture",
                format!(
                    "{} weights, {} means, {} covariances",
                    weights.len(),
                    means.len(),
                    covs.len()
                ),
            ));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::Empty { what: "mixture mean" });
        }
        let total = weights.iter().fold(T::zero(), |a, &b| a + b);
        if (total - T::one()).abs() > T::of(1e-12).max(T::epsilon() * T::of(16.0)) {
            return Err(invalid("weights", format!("sum to {total}, expected 1")));
        }
        let mut components = Vec::with_capacity(weights.len());
        for (m, ((w, mean), cov)) in weights.into_iter().zip(means).zip(covs).enumerate() {
            if !(w > T::zero() && w <= T::one()) {
                return Err(invalid("weights", format!("component {m} has weight {w}")));
            }
            if mean.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: mean.len(),
                });
            }
            if cov.len() != dim * dim {
                return Err(Error::DimensionMismatch {
                    expected: dim * dim,
                    found: cov.len(),
                });
            }
            if mean.iter().chain(&cov).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("mixture parameters"));
            }
            for i in 0..dim {
                for j in 0..i {
                    let (a, b) = (cov[i * dim + j], cov[j * dim + i]);
                    if (a - b).abs() > T::of(1e-12) * (T::one() + a.abs()) {
                        return Err(invalid("covariance", format!("component {m} is not symmetric")));
                    }
                }
            }
            let chol = Cholesky::factor(&cov, dim).map_err(|_| Error::NotPositiveDefinite {
                context: format!("covariance of component {m}"),
            })?;
            components.push(MixtureComponent {
                weight: w,
                mean,
                cov,
                chol,
            });
        }
        let mut acc = T::zero();
        let cumulative = components
            .iter()
            .map(|c| {
                acc = acc + c.weight;
                acc
            })
            .collect();
        Ok(Self {
            dim,
            components,
            cumulative,
        })
    }

    /// Single Gaussian `N(mean, cov)`.
    pub fn gaussian(mean: Vec<T>, cov: Vec<T>) -> Result<Self> {
        Self::new(vec![T::one()], vec![mean], vec![cov])
    }

    /// `N(0, sigma^2 I_d)`.
    pub fn isotropic(dim: usize, sigma: T) -> Result<Self> {
        let mut cov = vec![T::zero(); dim * dim];
        for i in 0..dim {
            cov[i * dim + i] = sigma * sigma;
        }
        Self::gaussian(vec![T::zero(); dim], cov)
    }

    /// The fixed ten-component, two-dimensional benchmark mixture with equal weights.
    pub fn benchmark_2d() -> Self {
        const MEANS: [[f64; 2]; 10] = [
            [-2.1, 1.6],
            [1.7, 2.2],
            [0.2, -0.3],
            [-1.4, -2.2],
            [2.5, -1.1],
            [-2.9, -0.4],
            [0.8, 2.9],
            [-0.6, 1.0],
            [1.2, -2.6],
            [2.8, 0.7],
        ];
        // (var_x, var_y, covariance)
        const COVS: [[f64; 3]; 10] = [
            [0.30, 0.20, 0.05],
            [0.25, 0.40, -0.10],
            [0.45, 0.30, 0.12],
            [0.20, 0.35, 0.00],
            [0.40, 0.25, -0.08],
            [0.25, 0.50, 0.10],
            [0.35, 0.20, 0.04],
            [0.20, 0.20, -0.05],
            [0.30, 0.45, 0.15],
            [0.25, 0.30, -0.06],
        ];
        let weights = vec![T::of(0.1); 10];
        let means = MEANS.iter().map(|m| vec![T::of(m[0]), T::of(m[1])]).collect();
        let covs = COVS
            .iter()
            .map(|c| vec![T::of(c[0]), T::of(c[2]), T::of(c[2]), T::of(c[1])])
            .collect();
        Self::new(weights, means, covs).expect("benchmark mixture is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[MixtureComponent<T>] {
        &self.components
    }

    /// Component index for a uniform draw `u` in `[0, 1)`.
    pub fn component_for(&self, u: T) -> usize {
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.components.len() - 1)
    }

    /// One draw; `z` receives the standard normal used for the affine map.
    pub(crate) fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [T], out: &mut [T]) -> usize {
        let u: f64 = rng.random();
        let m = self.component_for(T::of(u));
        for zi in z.iter_mut() {
            let v: f64 = StandardNormal.sample(rng);
            *zi = T::of(v);
        }
        let c = &self.components[m];
        c.chol.mul_lower(z, out);
        for (o, mu) in out.iter_mut().zip(&c.mean) {
            *o = *o + *mu;
        }
        m
    }

    /// `n` draws in antithetic pairs `mu_m +/- L z`, so every component's sample
    /// is symmetric about its mean.
    pub fn antithetic_sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<PointSet<T>> {
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        let d = self.dim;
        let mut data = vec![T::zero(); n * d];
        let mut z = vec![T::zero(); d];
        let mut i = 0;
        while i < n {
            let m = self.draw_into(rng, &mut z, &mut data[i * d..(i + 1) * d]);
            if i + 1 < n {
                let c = &self.components[m];
                for k in 0..d {
                    data[(i + 1) * d + k] = c.mean[k] + c.mean[k] - data[i * d + k];
                }
            }
            i += 2;
        }
        PointSet::new(data, d)
    }
}

/// Empirical measure of a dataset, one point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTarget<T> {
    data: PointSet<T>,
}

impl<T: Scalar> EmpiricalTarget<T> {
    pub fn new(data: PointSet<T>) -> Self {
        Self { data }
    }

    pub fn points(&self) -> &PointSet<T> {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target<T> {
    Mixture(GaussianMixture<T>),
    Empirical(EmpiricalTarget<T>),
}

impl<T: Scalar> From<GaussianMixture<T>> for Target<T> {
    fn from(g: GaussianMixture<T>) -> Self {
        Target::Mixture(g)
    }
}

impl<T: Scalar> From<EmpiricalTarget<T>> for Target<T> {
    fn from(e: EmpiricalTarget<T>) -> Self {
        Target::Empirical(e)
    }
}

impl<T: Scalar> Target<T> {
    pub fn dim(&self) -> usize {
        match self {
            Target::Mixture(g) => g.dim(),
            Target::Empirical(e) => e.dim(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Target::Mixture(_) => "gaussian-mixture",
            Target::Empirical(_) => "empirical",
        }
    }

    /// `n` i.i.d. draws. Mixtures pick a component by inverse CDF on one uniform,
    /// then map standard normals through the Cholesky factor; datasets draw rows
    /// uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<PointSet<T>> {
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        let d = self.dim();
        let mut data = vec![T::zero(); n * d];
        match self {
            Target::Mixture(g) => {
                let mut z = vec![T::zero(); d];
                for row in data.chunks_exact_mut(d) {
                    g.draw_into(rng, &mut z, row);
                }
            }
            Target::Empirical(e) => {
                let pts = e.points();
                for row in data.chunks_exact_mut(d) {
                    let r = rng.random_range(0..pts.len());
                    row.copy_from_slice(pts.point(r));
                }
            }
        }
        PointSet::new(data, d)
    }
}
