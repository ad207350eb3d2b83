//! Test integrands with known integrals under the target.

use crate::embedding::Embedding;
use crate::error::{invalid, Error, Result};
use crate::kernel::{Kernel, KernelFamily};
use crate::linalg::{add_diagonal, Cholesky};
use crate::points::{check_point, PointSet};
use crate::scalar::{CompensatedSum, Scalar};
use crate::target::{GaussianMixture, Target};

#[derive(Debug, Clone, PartialEq)]
pub enum Integrand<T> {
    /// `exp(-|x|^2 / 2)`
    F1,
    /// `|x|^2`
    F2,
    /// `sum_j sum_l d/da_l k(a_j, x)` over the anchors `a_j`.
    GradSpan { anchor: PointSet<T>, kernel: Kernel<T> },
    /// `sum_j c_j k(z_j, x)`.
    RkhsElement {
        coeffs: Vec<T>,
        centers: PointSet<T>,
        kernel: Kernel<T>,
    },
}

impl<T: Scalar> Integrand<T> {
    pub fn grad_span(anchor: PointSet<T>, kernel: Kernel<T>) -> Self {
        Integrand::GradSpan { anchor, kernel }
    }

    pub fn rkhs_element(coeffs: Vec<T>, centers: PointSet<T>, kernel: Kernel<T>) -> Result<Self> {
        if coeffs.len() != centers.len() {
            return Err(invalid(
                "rkhs element",
                format!("{} coefficients for {} centers", coeffs.len(), centers.len()),
            ));
        }
        Ok(Integrand::RkhsElement {
            coeffs,
            centers,
            kernel,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Integrand::F1 => "f1",
            Integrand::F2 => "f2",
            Integrand::GradSpan { .. } => "gradspan",
            Integrand::RkhsElement { .. } => "rkhs",
        }
    }

    fn fixed_dim(&self) -> Option<usize> {
        match self {
            Integrand::F1 | Integrand::F2 => None,
            Integrand::GradSpan { anchor, .. } => Some(anchor.dim()),
            Integrand::RkhsElement { centers, .. } => Some(centers.dim()),
        }
    }

    pub fn eval(&self, x: &[T]) -> Result<T> {
        check_point(x, self.fixed_dim().unwrap_or(x.len()))?;
        Ok(self.eval_raw(x))
    }

    pub(crate) fn eval_raw(&self, x: &[T]) -> T {
        match self {
            Integrand::F1 => (-x.iter().fold(T::zero(), |s, &v| s + v * v) / T::of(2.0)).exp(),
            Integrand::F2 => x.iter().fold(T::zero(), |s, &v| s + v * v),
            Integrand::GradSpan { anchor, kernel } => {
                let mut acc = CompensatedSum::new();
                let mut g = vec![T::zero(); x.len()];
                for a in anchor.rows() {
                    g.iter_mut().for_each(|v| *v = T::zero());
                    kernel.add_grad1_raw(a, x, T::one(), &mut g);
                    g.iter().for_each(|&v| acc.add(v));
                }
                acc.value()
            }
            Integrand::RkhsElement {
                coeffs,
                centers,
                kernel,
            } => {
                let mut acc = CompensatedSum::new();
                for (c, z) in coeffs.iter().zip(centers.rows()) {
                    acc.add(*c * kernel.eval_raw(z, x));
                }
                acc.value()
            }
        }
    }

    /// `int f d mu`: closed forms for mixtures, exact averages for datasets.
    pub fn true_integral(&self, target: &Target<T>) -> Result<T> {
        if let Some(d) = self.fixed_dim() {
            if d != target.dim() {
                return Err(Error::DimensionMismatch {
                    expected: target.dim(),
                    found: d,
                });
            }
        }
        match target {
            Target::Empirical(e) => {
                let mut acc = CompensatedSum::new();
                for y in e.points().rows() {
                    acc.add(self.eval_raw(y));
                }
                Ok(acc.value() / T::of(e.len() as f64))
            }
            Target::Mixture(g) => match self {
                Integrand::F1 => mixture_f1(g),
                Integrand::F2 => Ok(mixture_f2(g)),
                Integrand::GradSpan { anchor, kernel } => {
                    if kernel.family() != KernelFamily::Gaussian {
                        return Err(Error::Unsupported {
                            kernel: kernel.family().name().into(),
                            target: target.kind_name().into(),
                            hint: "gradient-span integrals have a closed form for Gaussian kernels only",
                        });
                    }
                    // int d/da_l k(a, x) dmu(x) = d/da_l m(a)
                    let emb = Embedding::new(*kernel, target)?;
                    let mut acc = CompensatedSum::new();
                    let mut grad = vec![T::zero(); anchor.dim()];
                    for a in anchor.rows() {
                        grad.iter_mut().for_each(|v| *v = T::zero());
                        emb.add_grad_raw(a, T::one(), &mut grad);
                        grad.iter().for_each(|&v| acc.add(v));
                    }
                    Ok(acc.value())
                }
                Integrand::RkhsElement {
                    coeffs,
                    centers,
                    kernel,
                } => {
                    let emb = Embedding::new(*kernel, target)?;
                    let mut acc = CompensatedSum::new();
                    for (c, z) in coeffs.iter().zip(centers.rows()) {
                        acc.add(*c * emb.mean_embedding_raw(z));
                    }
                    Ok(acc.value())
                }
            },
        }
    }

    /// `|(1/n) sum_i f(x_i) - int f d mu|`.
    pub fn integration_error(&self, x: &PointSet<T>, target: &Target<T>) -> Result<T> {
        x.check_dim(target.dim())?;
        let truth = self.true_integral(target)?;
        Ok((self.point_average(x)? - truth).abs())
    }

    /// `(1/n) sum_i f(x_i)`.
    pub fn point_average(&self, x: &PointSet<T>) -> Result<T> {
        if let Some(d) = self.fixed_dim() {
            x.check_dim(d)?;
        }
        let mut acc = CompensatedSum::new();
        for r in x.rows() {
            acc.add(self.eval_raw(r));
        }
        Ok(acc.value() / T::of(x.len() as f64))
    }

    /// `sqrt(c^T K c)` for RKHS elements.
    pub fn rkhs_norm(&self) -> Result<T> {
        match self {
            Integrand::RkhsElement {
                coeffs,
                centers,
                kernel,
            } => {
                let mut acc = CompensatedSum::new();
                for (ci, zi) in coeffs.iter().zip(centers.rows()) {
                    for (cj, zj) in coeffs.iter().zip(centers.rows()) {
                        acc.add(*ci * *cj * kernel.eval_raw(zi, zj));
                    }
                }
                Ok(acc.value().max(T::zero()).sqrt())
            }
            other => Err(invalid(
                "integrand",
                format!("RKHS norm is only available for rkhs elements, not `{}`", other.name()),
            )),
        }
    }
}

/// `sum_m w_m det(Sigma_m + I)^(-1/2) exp(-mu_m^T (Sigma_m + I)^-1 mu_m / 2)`.
fn mixture_f1<T: Scalar>(g: &GaussianMixture<T>) -> Result<T> {
    let d = g.dim();
    let mut acc = CompensatedSum::new();
    for c in g.components() {
        let chol = Cholesky::factor(&add_diagonal(&c.cov, d, T::one()), d)?;
        let q = chol.inv_quad(&c.mean);
        acc.add(c.weight * (-(chol.log_det() + q) / T::of(2.0)).exp());
    }
    Ok(acc.value())
}

/// `sum_m w_m (tr Sigma_m + |mu_m|^2)`.
fn mixture_f2<T: Scalar>(g: &GaussianMixture<T>) -> T {
    let d = g.dim();
    let mut acc = CompensatedSum::new();
    for c in g.components() {
        let tr = (0..d).fold(T::zero(), |s, i| s + c.cov[i * d + i]);
        let m2 = c.mean.iter().fold(T::zero(), |s, &v| s + v * v);
        acc.add(c.weight * (tr + m2));
    }
    acc.value()
}
