//! Kernels centered at the target:
//! `k~(x, y) = k(x, y) - m(x) - m(y) + E k(Y, Y')`.
//!
//! The centered kernel integrates to zero under the target in either argument,
//! and MMD computed with it equals MMD computed with the base kernel.

use crate::embedding::Embedding;
use crate::error::Result;
use crate::kernel::Kernel;
use crate::points::{check_point, PointSet};
use crate::scalar::{CompensatedSum, Scalar};
use crate::target::Target;

#[derive(Debug, Clone)]
pub struct CenteredKernel<'a, T> {
    embedding: Embedding<'a, T>,
}

impl<'a, T: Scalar> CenteredKernel<'a, T> {
    pub fn new(kernel: Kernel<T>, target: &'a Target<T>) -> Result<Self> {
        Ok(Self {
            embedding: Embedding::new(kernel, target)?,
        })
    }

    pub fn from_embedding(embedding: Embedding<'a, T>) -> Self {
        Self { embedding }
    }

    pub fn base(&self) -> &Kernel<T> {
        self.embedding.kernel()
    }

    pub fn embedding(&self) -> &Embedding<'a, T> {
        &self.embedding
    }

    /// Cached `E k(Y, Y')` of the base kernel.
    pub fn base_double_integral(&self) -> T {
        self.embedding.double_integral()
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> Result<T> {
        let d = self.embedding.dim();
        check_point(x, d)?;
        check_point(y, d)?;
        Ok(
            self.base().eval_raw(x, y) - self.embedding.mean_embedding_raw(x) - self.embedding.mean_embedding_raw(y)
                + self.embedding.double_integral(),
        )
    }

    pub fn grad1(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        let mut g = self.base().grad1(x, y)?;
        check_point(x, self.embedding.dim())?;
        self.embedding.add_grad_raw(x, -T::one(), &mut g);
        Ok(g)
    }

    /// `E_Y k~(x, Y)`. Zero for every `x`; for empirical targets it is evaluated
    /// as the dataset average, for mixtures through the embedding identity.
    pub fn mean_embedding(&self, x: &[T]) -> Result<T> {
        check_point(x, self.embedding.dim())?;
        match self.embedding.target() {
            Target::Empirical(e) => {
                let m = self.embedding.mean_embedding_raw(x);
                let kmumu = self.embedding.double_integral();
                let mut acc = CompensatedSum::new();
                for y in e.points().rows() {
                    acc.add(self.base().eval_raw(x, y) - m - self.embedding.mean_embedding_raw(y) + kmumu);
                }
                Ok(acc.value() / T::of(e.len() as f64))
            }
            // E_Y[k(x,Y)] - m(x) - E_Y[m(Y)] + kmumu, where both pairs cancel.
            Target::Mixture(_) => Ok(T::zero()),
        }
    }

    /// `E k~(Y, Y')`, identically zero.
    pub fn double_integral(&self) -> T {
        let kmumu = self.embedding.double_integral();
        kmumu - (kmumu + kmumu) + kmumu
    }

    /// Gram matrix over `x`, row-major, evaluating each `m(x_i)` once.
    pub fn gram(&self, x: &PointSet<T>) -> Result<Vec<T>> {
        x.check_dim(self.embedding.dim())?;
        let n = x.len();
        let m: Vec<T> = x.rows().map(|r| self.embedding.mean_embedding_raw(r)).collect();
        let kmumu = self.embedding.double_integral();
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.base().eval_raw(x.point(i), x.point(j)) - m[i] - m[j] + kmumu;
            }
        }
        Ok(out)
    }
}
