//! Squared MMD between a particle set and the target, its particle gradient
//! and the stationarity residual.
//!
//! Sums over particles run in canonical (lexicographic) particle order with
//! compensated accumulation, so every quantity here is bitwise invariant to
//! how the caller orders the particles.

use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::Embedding;
use crate::error::Result;
use crate::points::{check_point, PointSet};
use crate::scalar::{norm, sq_dist, CompensatedSum, Scalar};

/// Rows are evaluated in parallel from this many particles upwards.
const PARALLEL_MIN_PARTICLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MmdReport<T> {
    pub mmd: T,
    pub mmd_squared: T,
    pub kxx: T,
    pub kxmu: T,
    pub kmumu: T,
}

impl<T: Scalar> MmdReport<T> {
    fn from_terms(kxx: T, kxmu: T, kmumu: T) -> Self {
        let mmd_squared = kxx - (kxmu + kxmu) + kmumu;
        Self {
            mmd: mmd_squared.max(T::zero()).sqrt(),
            mmd_squared,
            kxx,
            kxmu,
            kmumu,
        }
    }

    pub fn to_f64(&self) -> MmdReport<f64> {
        MmdReport {
            mmd: self.mmd.to_f64_lossy(),
            mmd_squared: self.mmd_squared.to_f64_lossy(),
            kxx: self.kxx.to_f64_lossy(),
            kxmu: self.kxmu.to_f64_lossy(),
            kmumu: self.kmumu.to_f64_lossy(),
        }
    }
}

/// `MMD^2(mu_n, mu) = kxx - 2 kxmu + kmumu`.
pub fn mmd_squared<T: Scalar>(emb: &Embedding<'_, T>, x: &PointSet<T>) -> Result<MmdReport<T>> {
    x.check_dim(emb.dim())?;
    let k = emb.kernel();
    let xs = x.permuted(&x.canonical_order());
    let n = xs.len();
    let mut diag = CompensatedSum::new();
    let mut off = CompensatedSum::new();
    let mut cross = CompensatedSum::new();
    for i in 0..n {
        let xi = xs.point(i);
        diag.add(k.eval_raw(xi, xi));
        for j in i + 1..n {
            off.add(k.eval_raw(xi, xs.point(j)));
        }
        cross.add(emb.mean_embedding_raw(xi));
    }
    let nf = T::of(n as f64);
    let kxx = (diag.value() + off.value() * T::of(2.0)) / (nf * nf);
    Ok(MmdReport::from_terms(kxx, cross.value() / nf, emb.double_integral()))
}

/// Writes `(1/n) sum_j grad_1 k(z, x_j) - grad m(z)` into `out`.
///
/// `sorted` must already be in canonical order.
pub(crate) fn bracket_at<T: Scalar>(emb: &Embedding<'_, T>, sorted: &PointSet<T>, z: &[T], out: &mut [T]) {
    let d = z.len();
    let k = emb.kernel();
    let mut acc = [CompensatedSum::new(); 8];
    let mut acc_heap;
    let acc: &mut [CompensatedSum<T>] = if d <= 8 {
        &mut acc[..d]
    } else {
        acc_heap = vec![CompensatedSum::new(); d];
        &mut acc_heap
    };
    for y in sorted.rows() {
        let (_, f) = k.value_and_factor_sq(sq_dist(z, y));
        for l in 0..d {
            acc[l].add(f * (z[l] - y[l]));
        }
    }
    let inv_n = T::one() / T::of(sorted.len() as f64);
    for (o, a) in out.iter_mut().zip(acc.iter()) {
        *o = a.value() * inv_n;
    }
    emb.add_grad_raw(z, -T::one(), out);
}

/// Fills `out` (n x d) with row `i` produced by `row(i, out_row)`.
pub(crate) fn fill_rows<T, F>(out: &mut [T], d: usize, row: F)
where
    T: Scalar,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let n = out.len() / d;
    if n >= PARALLEL_MIN_PARTICLES {
        out.par_chunks_mut(d).enumerate().for_each(|(i, r)| row(i, r));
    } else {
        out.chunks_mut(d).enumerate().for_each(|(i, r)| row(i, r));
    }
}

/// Per-particle stationarity bracket
/// `(1/n) sum_j grad_1 k(x_i, x_j) - E grad_1 k(x_i, Y)`, row-major `n x d`.
pub fn stationarity_bracket<T: Scalar>(emb: &Embedding<'_, T>, x: &PointSet<T>) -> Result<Vec<T>> {
    x.check_dim(emb.dim())?;
    let sorted = x.permuted(&x.canonical_order());
    let d = x.dim();
    let mut out = vec![T::zero(); x.len() * d];
    fill_rows(&mut out, d, |i, r| bracket_at(emb, &sorted, x.point(i), r));
    Ok(out)
}

/// Gradient of `MMD^2` with respect to every particle: `(2/n)` times the bracket.
pub fn grad_particles<T: Scalar>(emb: &Embedding<'_, T>, x: &PointSet<T>) -> Result<Vec<T>> {
    let mut g = stationarity_bracket(emb, x)?;
    let s = T::of(2.0) / T::of(x.len() as f64);
    g.iter_mut().for_each(|v| *v = *v * s);
    Ok(g)
}

/// `max_i |bracket_i|`; zero exactly at stationary point sets.
pub fn stationarity_residual<T: Scalar>(emb: &Embedding<'_, T>, x: &PointSet<T>) -> Result<T> {
    let b = stationarity_bracket(emb, x)?;
    Ok(max_row_norm(&b, x.dim()))
}

pub(crate) fn max_row_norm<T: Scalar>(rows: &[T], d: usize) -> T {
    rows.chunks_exact(d).map(norm).fold(T::zero(), T::max)
}

/// `Phi(z, w) = E grad_1 k(z, Y) - grad_1 k(z, w)`.
pub fn phi<T: Scalar>(emb: &Embedding<'_, T>, z: &[T], w: &[T]) -> Result<Vec<T>> {
    let d = emb.dim();
    check_point(z, d)?;
    check_point(w, d)?;
    let mut out = vec![T::zero(); d];
    emb.add_grad_raw(z, T::one(), &mut out);
    emb.kernel().add_grad1_raw(z, w, -T::one(), &mut out);
    Ok(out)
}
