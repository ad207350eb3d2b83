//! Small dense symmetric positive definite algebra for d x d covariances.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower Cholesky factor of a symmetric positive definite matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    dim: usize,
    lower: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(a: &[T], dim: usize) -> Result<Self> {
        if a.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: a.len(),
            });
        }
        let mut l = vec![T::zero(); dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let mut s = a[i * dim + j];
                for k in 0..j {
                    s = s - l[i * dim + k] * l[j * dim + k];
                }
                if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite {
                            context: format!("pivot {i} = {s}"),
                        });
                    }
                    l[i * dim + i] = s.sqrt();
                } else {
                    l[i * dim + j] = s / l[j * dim + j];
                }
            }
        }
        Ok(Self { dim, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn log_det(&self) -> T {
        let two = T::of(2.0);
        (0..self.dim)
            .map(|i| self.lower[i * self.dim + i].ln())
            .fold(T::zero(), |a, b| a + b)
            * two
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        let n = self.dim;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - self.lower[i * n + k] * b[k];
            }
            b[i] = s / self.lower[i * n + i];
        }
    }

    /// Solves `L^T x = y` in place.
    pub fn solve_upper_in_place(&self, b: &mut [T]) {
        let n = self.dim;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s = s - self.lower[k * n + i] * b[k];
            }
            b[i] = s / self.lower[i * n + i];
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        self.solve_lower_in_place(b);
        self.solve_upper_in_place(b);
    }

    /// `v^T A^{-1} v`.
    pub fn inv_quad(&self, v: &[T]) -> T {
        let mut w = v.to_vec();
        self.solve_lower_in_place(&mut w);
        w.iter().fold(T::zero(), |s, &a| s + a * a)
    }

    /// `L z`, used to map standard normals onto the covariance.
    pub fn mul_lower(&self, z: &[T], out: &mut [T]) {
        let n = self.dim;
        for i in 0..n {
            let mut s = T::zero();
            for k in 0..=i {
                s = s + self.lower[i * n + k] * z[k];
            }
            out[i] = s;
        }
    }
}

/// `a + c I` for a row-major square matrix.
pub(crate) fn add_diagonal<T: Scalar>(a: &[T], dim: usize, c: T) -> Vec<T> {
    let mut out = a.to_vec();
    for i in 0..dim {
        out[i * dim + i] = out[i * dim + i] + c;
    }
    out
}
