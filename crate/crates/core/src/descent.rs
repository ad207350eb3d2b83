//! Plain and noisy MMD particle descent.
//!
//! One step moves every particle against the stationarity bracket, with the
//! kernel gradients evaluated at a noise-perturbed copy of the particle:
//!
//! ```text
//! x_i <- x_i - gamma [ (1/n) sum_j grad_1 k(x_i + beta u_i, x_j) - E grad_1 k(x_i + beta u_i, Y) ]
//! ```
//!
//! The particle itself is never perturbed. With `beta = 0` this is plain
//! gradient descent on the squared MMD (up to the `2/n` factor).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{invalid, Error, Result};
use crate::mmd::{bracket_at, fill_rows, max_row_norm, mmd_squared, stationarity_residual};
use crate::points::PointSet;
use crate::scalar::{CompensatedSum, Scalar};

/// Defaults for the noise-level check.
pub const DEFAULT_CHECK_SAMPLES: usize = 100;
pub const DEFAULT_CHECK_EVERY: usize = 100;

/// MMD growth over the initial value that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseSchedule {
    None,
    /// `beta_t = beta0 t^(-alpha)`.
    PowerLaw {
        beta0: f64,
        alpha: f64,
    },
    /// Per check window, the smallest `beta0 t^(-a)` over `exponents` that passes
    /// the noise-level check; the largest candidate if none passes.
    Adaptive {
        beta0: f64,
        exponents: Vec<f64>,
        check_samples: usize,
    },
}

impl NoiseSchedule {
    pub fn power_law(beta0: f64, alpha: f64) -> Self {
        NoiseSchedule::PowerLaw { beta0, alpha }
    }

    /// Candidate set `{t^-0.5, t^-0.25, t^-0.1}`.
    pub fn adaptive_default() -> Self {
        NoiseSchedule::Adaptive {
            beta0: 1.0,
            exponents: vec![0.5, 0.25, 0.1],
            check_samples: DEFAULT_CHECK_SAMPLES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseSchedule::None => Ok(()),
            NoiseSchedule::PowerLaw { beta0, alpha } => {
                if !(*beta0 > 0.0) || !beta0.is_finite() {
                    return Err(invalid("beta0", format!("must be positive, got {beta0}")));
                }
                if !(0.0..=0.5).contains(alpha) {
                    return Err(invalid("alpha", format!("must lie in [0, 0.5], got {alpha}")));
                }
                Ok(())
            }
            NoiseSchedule::Adaptive {
                beta0,
                exponents,
                check_samples,
            } => {
                if !(*beta0 > 0.0) || !beta0.is_finite() {
                    return Err(invalid("beta0", format!("must be positive, got {beta0}")));
                }
                if exponents.is_empty() || exponents.iter().any(|a| !(0.0..=0.5).contains(a)) {
                    return Err(invalid("exponents", "need at least one, each in [0, 0.5]"));
                }
                if *check_samples == 0 {
                    return Err(invalid("check_samples", "must be at least 1"));
                }
                Ok(())
            }
        }
    }

    /// Noise level at iteration `t >= 1`. Adaptive schedules report their
    /// fallback (largest) candidate; the run resolves the actual choice.
    pub fn beta_at(&self, t: usize) -> f64 {
        let tf = t.max(1) as f64;
        match self {
            NoiseSchedule::None => 0.0,
            NoiseSchedule::PowerLaw { beta0, alpha } => beta0 * tf.powf(-alpha),
            NoiseSchedule::Adaptive { .. } => *self.candidates_at(t).last().unwrap_or(&0.0),
        }
    }

    /// Adaptive candidates at `t` in increasing order of `beta`.
    pub fn candidates_at(&self, t: usize) -> Vec<f64> {
        let tf = t.max(1) as f64;
        match self {
            NoiseSchedule::Adaptive { beta0, exponents, .. } => {
                let mut c: Vec<f64> = exponents.iter().map(|a| beta0 * tf.powf(-a)).collect();
                c.sort_by(f64::total_cmp);
                c
            }
            other => vec![other.beta_at(t)],
        }
    }
}

/// Free-function form of [`NoiseSchedule::beta_at`].
pub fn beta_at(schedule: &NoiseSchedule, t: usize) -> f64 {
    schedule.beta_at(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StepSchedule {
    Constant {
        gamma: f64,
    },
    /// `start` up to iteration `from`, geometric interpolation to `end` at
    /// iteration `to`, then `end`.
    Anneal {
        start: f64,
        end: f64,
        from: usize,
        to: usize,
    },
}

impl StepSchedule {
    pub fn constant(gamma: f64) -> Self {
        StepSchedule::Constant { gamma }
    }

    pub fn gamma_at(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Constant { gamma } => gamma,
            StepSchedule::Anneal { start, end, from, to } => {
                if t <= from {
                    start
                } else if t >= to {
                    end
                } else {
                    let frac = (t - from) as f64 / (to - from) as f64;
                    start * (end / start).powf(frac)
                }
            }
        }
    }

    /// Largest step the schedule ever takes.
    pub fn max_gamma(&self) -> f64 {
        match *self {
            StepSchedule::Constant { gamma } => gamma,
            StepSchedule::Anneal { start, end, .. } => start.max(end),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |g: f64| g > 0.0 && g.is_finite();
        match *self {
            StepSchedule::Constant { gamma } if !ok(gamma) => {
                Err(invalid("gamma", format!("must be positive, got {gamma}")))
            }
            StepSchedule::Anneal { start, end, from, to } => {
                if !ok(start) || !ok(end) {
                    return Err(invalid("gamma", "anneal endpoints must be positive"));
                }
                if to <= from {
                    return Err(invalid("anneal", format!("`to` ({to}) must exceed `from` ({from})")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub step: StepSchedule,
    /// Number of descent steps `T`.
    pub iterations: usize,
    pub schedule: NoiseSchedule,
    /// Noise is switched off after this iteration.
    #[serde(default)]
    pub noise_until: Option<usize>,
    pub seed: u64,
    pub log_every: usize,
    /// Stop once the residual falls to this level; takes precedence over `iterations`.
    #[serde(default)]
    pub stop_residual: Option<f64>,
    #[serde(default)]
    pub assumption_check_every: Option<usize>,
    #[serde(default = "default_check_samples")]
    pub assumption_check_samples: usize,
}

fn default_check_samples() -> usize {
    DEFAULT_CHECK_SAMPLES
}

impl DescentConfig {
    pub fn new(gamma: f64, iterations: usize, schedule: NoiseSchedule, seed: u64) -> Self {
        Self {
            step: StepSchedule::constant(gamma),
            iterations,
            schedule,
            noise_until: None,
            seed,
            log_every: 100,
            stop_residual: None,
            assumption_check_every: None,
            assumption_check_samples: DEFAULT_CHECK_SAMPLES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.step.validate()?;
        self.schedule.validate()?;
        if self.iterations == 0 {
            return Err(invalid("T", "must be at least 1"));
        }
        if self.log_every == 0 {
            return Err(invalid("log_every", "must be at least 1"));
        }
        if let Some(s) = self.stop_residual {
            if !(s >= 0.0) {
                return Err(invalid("stop_residual", format!("must be nonnegative, got {s}")));
            }
        }
        if self.assumption_check_every == Some(0) {
            return Err(invalid("assumption_check_every", "must be at least 1"));
        }
        if self.assumption_check_samples == 0 {
            return Err(invalid("assumption_check_samples", "must be at least 1"));
        }
        Ok(())
    }

    /// Non-fatal deviations from the convergence theory for dimension `d` and
    /// kernel bound `kappa`.
    pub fn warnings(&self, d: usize, kappa: f64) -> Vec<String> {
        let mut w = Vec::new();
        let check = check_step_size(self.step.max_gamma(), d, kappa);
        if !check.ok {
            w.push(format!(
                "step size {} exceeds the theoretical bound {:.4e} (256 gamma^2 d^2 kappa^2 <= 1)",
                self.step.max_gamma(),
                check.bound
            ));
        }
        let at_half = match &self.schedule {
            NoiseSchedule::PowerLaw { alpha, .. } => *alpha >= 0.5,
            NoiseSchedule::Adaptive { exponents, .. } => exponents.iter().any(|a| *a >= 0.5),
            NoiseSchedule::None => false,
        };
        if at_half {
            w.push("noise exponent 0.5 lies outside the [0, 0.5) range covered by the rate guarantee".into());
        }
        w
    }

    fn beta_fixed(&self, t: usize) -> f64 {
        if self.noise_until.is_some_and(|u| t > u) {
            0.0
        } else {
            self.schedule.beta_at(t)
        }
    }
}

/// One logged iterate `x^(t)`; `beta` is the noise level applied to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub t: usize,
    pub mmd: f64,
    pub residual: f64,
    pub beta: f64,
    pub a5_lhs: Option<f64>,
    pub a5_rhs: Option<f64>,
    pub a5_satisfied: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub final_points: PointSet<T>,
    pub trajectory: Vec<TrajectoryEntry>,
    /// Descent steps actually taken.
    pub steps: usize,
    pub stopped_on_residual: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseCheck {
    pub lhs: f64,
    /// Right-hand side with the full kernel bound `kappa`.
    pub rhs: f64,
    /// Right-hand side with the first-derivative bound in place of `kappa`.
    pub rhs_first_order: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSizeCheck {
    pub ok: bool,
    /// Largest admissible step `1 / (16 d kappa)`.
    pub bound: f64,
}

/// `256 gamma^2 d^2 kappa^2 <= 1`.
pub fn check_step_size(gamma: f64, d: usize, kappa: f64) -> StepSizeCheck {
    let d = d as f64;
    StepSizeCheck {
        ok: 256.0 * gamma * gamma * d * d * kappa * kappa <= 1.0,
        bound: 1.0 / (16.0 * d * kappa),
    }
}

fn draw_noise<T: Scalar, R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<T> {
    (0..len)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            T::of(v)
        })
        .collect()
}

/// Returns the updated set and, when `beta == 0`, the residual of `x`.
fn step_inner<T: Scalar, R: Rng + ?Sized>(
    emb: &Embedding<'_, T>,
    x: &PointSet<T>,
    gamma: T,
    beta: T,
    rng: &mut R,
) -> Result<(PointSet<T>, Option<T>)> {
    x.check_dim(emb.dim())?;
    let d = x.dim();
    let n = x.len();
    let sorted = x.permuted(&x.canonical_order());
    // Noise is drawn up front in particle order so the parallel row evaluation
    // cannot change which particle receives which draw.
    let noise: Option<Vec<T>> = (beta > T::zero()).then(|| draw_noise(rng, n * d));
    let mut bracket = vec![T::zero(); n * d];
    fill_rows(&mut bracket, d, |i, row| match &noise {
        Some(u) => {
            let z: Vec<T> = x
                .point(i)
                .iter()
                .zip(&u[i * d..(i + 1) * d])
                .map(|(xi, ui)| *xi + beta * *ui)
                .collect();
            bracket_at(emb, &sorted, &z, row);
        }
        None => bracket_at(emb, &sorted, x.point(i), row),
    });
    let residual = noise.is_none().then(|| max_row_norm(&bracket, d));
    let mut next = Vec::with_capacity(n * d);
    for i in 0..n {
        for l in 0..d {
            let v = x.point(i)[l] - gamma * bracket[i * d + l];
            if !v.is_finite() {
                return Err(Error::NonFiniteUpdate { particle: i });
            }
            next.push(v);
        }
    }
    Ok((PointSet::new(next, d)?, residual))
}

/// One simultaneous update of all particles from the pre-step state.
pub fn descent_step<T: Scalar, R: Rng + ?Sized>(
    emb: &Embedding<'_, T>,
    x: &PointSet<T>,
    gamma: T,
    beta: T,
    rng: &mut R,
) -> Result<PointSet<T>> {
    if !(gamma > T::zero()) {
        return Err(invalid("gamma", format!("must be positive, got {gamma}")));
    }
    if !(beta >= T::zero()) {
        return Err(invalid("beta", format!("must be nonnegative, got {beta}")));
    }
    step_inner(emb, x, gamma, beta, rng).map(|(p, _)| p)
}

/// Empirical check of the noise-level condition at `(x, beta)`:
///
/// `lhs = (1/n) sum_i avg_M |(1/n) sum_j Phi(x_i + beta u_i, x_j)|^2`,
/// `rhs = 4 beta^2 d^2 kappa^2 MMD^2`.
pub fn check_assumption5<T: Scalar, R: Rng + ?Sized>(
    emb: &Embedding<'_, T>,
    x: &PointSet<T>,
    beta: T,
    samples: usize,
    rng: &mut R,
) -> Result<NoiseCheck> {
    if !(beta > T::zero()) {
        return Err(invalid("beta", format!("must be positive, got {beta}")));
    }
    if samples == 0 {
        return Err(invalid("M", "must be at least 1"));
    }
    x.check_dim(emb.dim())?;
    let d = x.dim();
    let n = x.len();
    let sorted = x.permuted(&x.canonical_order());
    let mut total = CompensatedSum::new();
    let mut z = vec![T::zero(); d];
    let mut row = vec![T::zero(); d];
    for _ in 0..samples {
        let u: Vec<T> = draw_noise(rng, n * d);
        for i in 0..n {
            for l in 0..d {
                z[l] = x.point(i)[l] + beta * u[i * d + l];
            }
            // (1/n) sum_j Phi(z, x_j) is the negated bracket at z.
            bracket_at(emb, &sorted, &z, &mut row);
            total.add(row.iter().fold(T::zero(), |s, &v| s + v * v));
        }
    }
    let lhs = total.value().to_f64_lossy() / (samples * n) as f64;
    let mmd2 = mmd_squared(emb, x)?.mmd_squared.max(T::zero()).to_f64_lossy();
    let b = beta.to_f64_lossy();
    let df = d as f64;
    let kappa = emb.kernel().kappa_bound().to_f64_lossy();
    let kappa1 = emb.kernel().first_derivative_bound().to_f64_lossy();
    let rhs = 4.0 * b * b * df * df * kappa * kappa * mmd2;
    Ok(NoiseCheck {
        lhs,
        rhs,
        rhs_first_order: 4.0 * b * b * df * df * kappa1 * kappa1 * mmd2,
        satisfied: lhs >= rhs,
    })
}

/// Default start: every particle at the origin, optionally perturbed by
/// `jitter` times standard-normal draws from a stream of its own.
pub fn initial_points<T: Scalar>(n: usize, d: usize, jitter: Option<f64>, seed: u64) -> Result<PointSet<T>> {
    let mut x = PointSet::zeros(n, d)?;
    if let Some(j) = jitter {
        if !(j >= 0.0) || !j.is_finite() {
            return Err(invalid("jitter", format!("must be nonnegative, got {j}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let u: Vec<T> = draw_noise(&mut rng, n * d);
        x = PointSet::new(u.into_iter().map(|v| v * T::of(j)).collect(), d)?;
    }
    Ok(x)
}

/// Check RNG for iteration `t`, independent of the descent noise stream.
fn check_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64 + 1);
    rng
}

/// Runs up to `cfg.iterations` descent steps from `x0`.
///
/// Entry `t` of the trajectory describes the iterate `x^(t)` before step `t`
/// (`x^(1) = x0`); the final iterate is logged as `t = steps + 1`. With noise
/// active the residual is evaluated only at logged iterations, so the stopping
/// rule is tested there; without noise it comes free with every step.
pub fn run_descent<T: Scalar>(emb: &Embedding<'_, T>, x0: &PointSet<T>, cfg: &DescentConfig) -> Result<RunOutput<T>> {
    cfg.validate()?;
    x0.check_dim(emb.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = x0.clone();
    let mut trajectory: Vec<TrajectoryEntry> = Vec::new();
    let initial_mmd = mmd_squared(emb, &x)?.mmd.to_f64_lossy();
    let check_every = cfg.assumption_check_every;
    let adaptive_every = check_every.unwrap_or(DEFAULT_CHECK_EVERY);
    let mut adaptive_beta = 0.0;
    let mut stopped = false;
    let mut steps = 0;

    for t in 1..=cfg.iterations + 1 {
        let last = t == cfg.iterations + 1;
        let noise_off = cfg.noise_until.is_some_and(|u| t > u);
        let mut check: Option<NoiseCheck> = None;
        let beta = match &cfg.schedule {
            NoiseSchedule::Adaptive { check_samples, .. } if !noise_off => {
                if t == 1 || (t - 1) % adaptive_every == 0 {
                    let candidates = cfg.schedule.candidates_at(t);
                    adaptive_beta = *candidates.last().expect("validated nonempty");
                    for &b in &candidates {
                        let c = check_assumption5(emb, &x, T::of(b), *check_samples, &mut check_rng(cfg.seed, t))?;
                        check = Some(c);
                        if c.satisfied {
                            adaptive_beta = b;
                            break;
                        }
                    }
                }
                adaptive_beta
            }
            _ => cfg.beta_fixed(t),
        };
        if check.is_none() && beta > 0.0 && check_every.is_some_and(|c| t % c == 0) {
            check = Some(check_assumption5(
                emb,
                &x,
                T::of(beta),
                cfg.assumption_check_samples,
                &mut check_rng(cfg.seed, t),
            )?);
        }
        let log_now = t == 1 || t % cfg.log_every == 0 || last || check.is_some();

        if last {
            let residual = stationarity_residual(emb, &x)?.to_f64_lossy();
            push_entry(emb, &x, &mut trajectory, t, residual, beta, check)?;
            break;
        }

        let gamma = T::of(cfg.step.gamma_at(t));
        let (next, free_residual) = step_inner(emb, &x, gamma, T::of(beta), &mut rng)?;
        let residual = match free_residual {
            Some(r) => Some(r.to_f64_lossy()),
            None if log_now => Some(stationarity_residual(emb, &x)?.to_f64_lossy()),
            None => None,
        };
        let stop = matches!((residual, cfg.stop_residual), (Some(r), Some(s)) if r <= s);
        if log_now || stop {
            let mmd = push_entry(emb, &x, &mut trajectory, t, residual.unwrap_or(f64::NAN), beta, check)?;
            if initial_mmd > 0.0 && mmd > DIVERGENCE_FACTOR * initial_mmd {
                return Err(Error::Diverged {
                    iteration: t,
                    mmd,
                    initial: initial_mmd,
                    trajectory,
                });
            }
        }
        if stop {
            stopped = true;
            break;
        }
        x = next;
        steps += 1;
    }

    Ok(RunOutput {
        final_points: x,
        trajectory,
        steps,
        stopped_on_residual: stopped,
    })
}

fn push_entry<T: Scalar>(
    emb: &Embedding<'_, T>,
    x: &PointSet<T>,
    trajectory: &mut Vec<TrajectoryEntry>,
    t: usize,
    residual: f64,
    beta: f64,
    check: Option<NoiseCheck>,
) -> Result<f64> {
    let mmd = mmd_squared(emb, x)?.mmd.to_f64_lossy();
    trajectory.push(TrajectoryEntry {
        t,
        mmd,
        residual,
        beta,
        a5_lhs: check.map(|c| c.lhs),
        a5_rhs: check.map(|c| c.rhs),
        a5_satisfied: check.map(|c| c.satisfied),
    });
    Ok(mmd)
}
