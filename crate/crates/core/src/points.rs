use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `n` particles in `d` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet<T> {
    data: Vec<T>,
    n: usize,
    dim: usize,
}

impl<T: Scalar> PointSet<T> {
    pub fn new(data: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty { what: "dimension" });
        }
        if data.is_empty() {
            return Err(Error::Empty { what: "point set" });
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point set"));
        }
        let n = data.len() / dim;
        Ok(Self { data, n, dim })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty { what: "point set" })?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(data, dim)
    }

    /// All `n` particles at the origin.
    pub fn zeros(n: usize, dim: usize) -> Result<Self> {
        Self::new(vec![T::zero(); n * dim], dim)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Particle indices in lexicographic coordinate order.
    ///
    /// Sums over particles run in this order so results do not depend on how the
    /// caller happened to order the set. Identical rows contribute identical terms,
    /// so ties need no further breaking.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n).collect();
        idx.sort_by(|&a, &b| {
            for (x, y) in self.point(a).iter().zip(self.point(b)) {
                match x.partial_cmp(y).unwrap_or(Ordering::Equal) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        });
        idx
    }

    /// Reorders the particles by `perm` (`out[i] = self[perm[i]]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.point(p));
        }
        Self {
            data,
            n: perm.len(),
            dim: self.dim,
        }
    }

    pub fn cast<U: Scalar>(&self) -> PointSet<U> {
        PointSet {
            data: self.data.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
            n: self.n,
            dim: self.dim,
        }
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        Ok(())
    }
}

pub(crate) fn check_point<T: Scalar>(x: &[T], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("point"));
    }
    Ok(())
}
