//! Baseline point sets: i.i.d. draws, kernel herding and support points.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{invalid, Error, Result};
use crate::points::PointSet;
use crate::scalar::{norm, CompensatedSum, Scalar};
use crate::target::Target;

/// Draws used for the support-points expectation when the target is a mixture.
pub const SUPPORT_POINTS_MIXTURE_SAMPLES: usize = 10_000;
pub const DEFAULT_HERDING_POOL: usize = 5_000;

pub fn iid_points<T: Scalar>(target: &Target<T>, n: usize, seed: u64) -> Result<PointSet<T>> {
    target.sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HerdingConfig {
    pub n: usize,
    /// Candidates drawn from the target; [`DEFAULT_HERDING_POOL`] when unset.
    #[serde(default)]
    pub candidate_pool: Option<usize>,
    #[serde(default)]
    pub local_refine: bool,
    #[serde(default = "default_refine_steps")]
    pub refine_steps: usize,
    pub seed: u64,
}

fn default_refine_steps() -> usize {
    50
}

impl HerdingConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            candidate_pool: None,
            local_refine: false,
            refine_steps: default_refine_steps(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        match self.candidate_pool {
            Some(0) => Err(Error::Empty { what: "candidate pool" }),
            Some(p) if p < self.n => Err(invalid(
                "candidate_pool",
                format!("{p} candidates for {} points", self.n),
            )),
            _ => Ok(()),
        }
    }
}

/// Herding score `m(x) - (1/(m+1)) sum_{j<=m} k(x, x_j)` for the `m` points
/// chosen so far.
pub fn herding_objective<T: Scalar>(emb: &Embedding<'_, T>, chosen: &[Vec<T>], x: &[T]) -> T {
    let k = emb.kernel();
    let s = compensated(chosen.iter().map(|c| k.eval_raw(x, c)));
    emb.mean_embedding_raw(x) - s / T::of((chosen.len() + 1) as f64)
}

fn compensated<T: Scalar>(it: impl Iterator<Item = T>) -> T {
    let mut acc = CompensatedSum::new();
    it.for_each(|v| acc.add(v));
    acc.value()
}

#[derive(Debug, Clone)]
pub struct HerdingOutput<T> {
    pub points: PointSet<T>,
    /// Index of the pool candidate chosen at each step.
    pub pool_choice: Vec<usize>,
    /// Objective values over the whole pool at each step, before refinement.
    pub pool_scores: Vec<Vec<T>>,
}

/// Greedy conditional-gradient construction over a seeded candidate pool,
/// optionally polishing each pick by gradient ascent on the herding score.
pub fn kernel_herding<T: Scalar>(emb: &Embedding<'_, T>, cfg: &HerdingConfig) -> Result<PointSet<T>> {
    kernel_herding_traced(emb, cfg, false).map(|o| o.points)
}

pub fn kernel_herding_traced<T: Scalar>(
    emb: &Embedding<'_, T>,
    cfg: &HerdingConfig,
    keep_scores: bool,
) -> Result<HerdingOutput<T>> {
    cfg.validate()?;
    let pool_size = cfg.candidate_pool.unwrap_or(DEFAULT_HERDING_POOL.max(cfg.n));
    let pool = emb
        .target()
        .sample(pool_size, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    let k = emb.kernel();
    let d = pool.dim();
    let embed: Vec<T> = pool.rows().map(|r| emb.mean_embedding_raw(r)).collect();
    // Running sum of k(candidate, x_j) over chosen points.
    let mut kernel_sums = vec![T::zero(); pool_size];
    let mut chosen: Vec<Vec<T>> = Vec::with_capacity(cfg.n);
    let mut pool_choice = Vec::with_capacity(cfg.n);
    let mut pool_scores = Vec::new();
    for m in 0..cfg.n {
        let denom = T::of((m + 1) as f64);
        let scores: Vec<T> = embed.iter().zip(&kernel_sums).map(|(e, s)| *e - *s / denom).collect();
        // Lowest index wins ties.
        let best = scores
            .iter()
            .enumerate()
            .fold(0, |b, (i, s)| if *s > scores[b] { i } else { b });
        let mut x = pool.point(best).to_vec();
        if cfg.local_refine {
            refine(emb, &chosen, &mut x, cfg.refine_steps);
        }
        for (c, s) in kernel_sums.iter_mut().enumerate() {
            *s = *s + k.eval_raw(pool.point(c), &x);
        }
        if keep_scores {
            pool_scores.push(scores);
        }
        pool_choice.push(best);
        chosen.push(x);
    }
    let data: Vec<T> = chosen.into_iter().flatten().collect();
    Ok(HerdingOutput {
        points: PointSet::new(data, d)?,
        pool_choice,
        pool_scores,
    })
}

/// Backtracking gradient ascent on the herding score; never lowers it.
fn refine<T: Scalar>(emb: &Embedding<'_, T>, chosen: &[Vec<T>], x: &mut [T], steps: usize) {
    let k = emb.kernel();
    let denom = T::of((chosen.len() + 1) as f64);
    let mut eta = k.lengthscale() * k.lengthscale();
    let mut current = herding_objective(emb, chosen, x);
    let mut grad = vec![T::zero(); x.len()];
    let mut trial = x.to_vec();
    for _ in 0..steps {
        grad.iter_mut().for_each(|g| *g = T::zero());
        emb.add_grad_raw(x, T::one(), &mut grad);
        for c in chosen {
            k.add_grad1_raw(x, c, -T::one() / denom, &mut grad);
        }
        if norm(&grad) < T::epsilon() {
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            for ((t, xi), g) in trial.iter_mut().zip(x.iter()).zip(&grad) {
                *t = *xi + eta * *g;
            }
            let v = herding_objective(emb, chosen, &trial);
            if v > current {
                x.copy_from_slice(&trial);
                current = v;
                improved = true;
                eta = eta * T::of(1.5);
                break;
            }
            eta = eta / T::of(2.0);
        }
        if !improved {
            break;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPointsConfig {
    pub n: usize,
    /// Iterations `T`.
    pub iterations: usize,
    pub step: f64,
    /// Distance floor guarding the unit-vector singularity at coincident points.
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    pub seed: u64,
}

fn default_smoothing() -> f64 {
    1e-12
}

impl SupportPointsConfig {
    pub fn new(n: usize, iterations: usize, step: f64, seed: u64) -> Self {
        Self {
            n,
            iterations,
            step,
            smoothing: default_smoothing(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(invalid("step", format!("must be positive, got {}", self.step)));
        }
        if !(self.smoothing > 0.0) {
            return Err(invalid(
                "smoothing",
                format!("must be positive, got {}", self.smoothing),
            ));
        }
        Ok(())
    }
}

/// Sample standing in for the target inside the energy functional: the dataset
/// itself for empirical targets, a seeded antithetic draw for mixtures.
pub fn energy_reference<T: Scalar>(target: &Target<T>, seed: u64) -> Result<PointSet<T>> {
    match target {
        Target::Empirical(e) => Ok(e.points().clone()),
        Target::Mixture(g) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            g.antithetic_sample(SUPPORT_POINTS_MIXTURE_SAMPLES, &mut rng)
        }
    }
}

/// Energy distance of `x` to `reference` up to the constant `E|Y - Y'|`:
/// `(2/n) sum_i avg_r |x_i - y_r| - (1/n^2) sum_{i,j} |x_i - x_j|`.
pub fn energy_objective<T: Scalar>(x: &PointSet<T>, reference: &PointSet<T>) -> T {
    let n = T::of(x.len() as f64);
    let m = T::of(reference.len() as f64);
    let dist = |a: &[T], b: &[T]| crate::scalar::sq_dist(a, b).sqrt();
    let cross = compensated(
        x.rows()
            .map(|xi| compensated(reference.rows().map(|y| dist(xi, y))) / m),
    );
    let within = compensated(x.rows().flat_map(|xi| x.rows().map(move |xj| dist(xi, xj))));
    T::of(2.0) * cross / n - within / (n * n)
}

/// Particle descent on the energy distance with `rho(x, y) = -|x - y|`:
/// `x_i += step [ (1/n) sum_{j != i} u(x_i - x_j) - E_Y u(x_i - Y) ]`,
/// `u(v) = v / max(|v|, eps)`, started from i.i.d. draws.
pub fn support_points<T: Scalar>(target: &Target<T>, cfg: &SupportPointsConfig) -> Result<PointSet<T>> {
    cfg.validate()?;
    let reference = energy_reference(target, cfg.seed)?;
    let mut x = iid_points(target, cfg.n, cfg.seed)?;
    support_points_descent(&mut x, &reference, cfg)?;
    Ok(x)
}

/// Runs the support-points iteration in place from `x`.
pub fn support_points_descent<T: Scalar>(
    x: &mut PointSet<T>,
    reference: &PointSet<T>,
    cfg: &SupportPointsConfig,
) -> Result<()> {
    x.check_dim(reference.dim())?;
    let d = x.dim();
    let n = x.len();
    let eps = T::of(cfg.smoothing);
    let step = T::of(cfg.step);
    let inv_n = T::one() / T::of(n as f64);
    let inv_m = T::one() / T::of(reference.len() as f64);
    let spread = |p: &PointSet<T>| p.as_slice().iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let limit = T::of(crate::descent::DIVERGENCE_FACTOR) * (spread(x).max(spread(reference)) + T::one());
    for _ in 0..cfg.iterations {
        let mut dir = vec![T::zero(); n * d];
        crate::mmd::fill_rows(&mut dir, d, |i, row| {
            let xi = x.point(i);
            let mut acc = vec![CompensatedSum::new(); d];
            for (j, xj) in x.rows().enumerate() {
                if j == i {
                    continue;
                }
                let r = crate::scalar::sq_dist(xi, xj).sqrt().max(eps);
                for l in 0..d {
                    acc[l].add((xi[l] - xj[l]) / r * inv_n);
                }
            }
            for y in reference.rows() {
                let r = crate::scalar::sq_dist(xi, y).sqrt().max(eps);
                for l in 0..d {
                    acc[l].add(-(xi[l] - y[l]) / r * inv_m);
                }
            }
            for (o, a) in row.iter_mut().zip(&acc) {
                *o = a.value();
            }
        });
        let next: Vec<T> = x.as_slice().iter().zip(&dir).map(|(v, g)| *v + step * *g).collect();
        if next.iter().any(|v| !v.is_finite() || v.abs() > limit) {
            return Err(Error::Diverged {
                iteration: 0,
                mmd: f64::NAN,
                initial: f64::NAN,
                trajectory: Vec::new(),
            });
        }
        *x = PointSet::new(next, d)?;
    }
    Ok(())
}
