//! Experiment grids: every (method, n, repetition) cell builds one point set
//! and evaluates every requested metric on it.

use std::path::Path;
use std::time::Instant;

use mmdpoints_core::baselines::{iid_points, kernel_herding, support_points};
use mmdpoints_core::{
    initial_points, mmd_squared, run_descent, stationarity_residual, Embedding, Integrand, Kernel, PointSet, Target,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, IntegrandSpec, Method};
use crate::dataset::{load_points, read_matrix};
use crate::error::{BenchError, Result};
use crate::output::{sort_rows, summarize, CellError, ResultRow, Summary};

pub const WORKERS_ENV: &str = "MMDPOINTS_WORKERS";

#[derive(Debug, Clone)]
pub struct Outcome {
    pub rows: Vec<ResultRow>,
    pub errors: Vec<CellError>,
    pub summary: Summary,
    /// Non-fatal notes about the configuration, e.g. step sizes beyond the
    /// theoretical bound.
    pub warnings: Vec<String>,
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of one grid cell; depends only on its own coordinates so growing the
/// grid never changes existing cells.
pub fn cell_seed(seed_base: u64, method: Method, n: usize, r: usize) -> u64 {
    let key = method
        .name()
        .bytes()
        .chain([0xff])
        .chain((n as u64).to_le_bytes())
        .chain((r as u64).to_le_bytes());
    seed_base.wrapping_add(fnv1a(key))
}

/// Worker count from `MMDPOINTS_WORKERS`, else the number of cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|w| *w >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()))
}

enum Metric {
    Mmd,
    Residual,
    Integrand(String, PreparedIntegrand),
}

enum PreparedIntegrand {
    /// Gradient span anchored at the point set under evaluation.
    GradSpanSelf,
    Fixed(Integrand<f64>),
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    target: &'a Target<f64>,
    emb: Embedding<'a, f64>,
    kernel: Kernel<f64>,
    metrics: Vec<Metric>,
}

fn prepare_integrand(spec: &IntegrandSpec, kernel: Kernel<f64>, d: usize, base: &Path) -> Result<PreparedIntegrand> {
    let check_dim = |path: &Path, found: usize| {
        if found == d {
            Ok(())
        } else {
            Err(BenchError::data(
                path,
                format!("points have dimension {found}, target has {d}"),
            ))
        }
    };
    Ok(match spec {
        IntegrandSpec::F1 => PreparedIntegrand::Fixed(Integrand::F1),
        IntegrandSpec::F2 => PreparedIntegrand::Fixed(Integrand::F2),
        IntegrandSpec::GradSpanSelf => PreparedIntegrand::GradSpanSelf,
        IntegrandSpec::GradSpanFile(p) => {
            let path = base.join(p);
            let anchor = load_points(&path, false)?;
            check_dim(&path, anchor.dim())?;
            PreparedIntegrand::Fixed(Integrand::grad_span(anchor, kernel))
        }
        IntegrandSpec::Rkhs(p) => {
            let path = base.join(p);
            let (data, width) = read_matrix(&path, false)?;
            if width < 2 {
                return Err(BenchError::data(
                    &path,
                    "need a coefficient column and at least one coordinate",
                ));
            }
            check_dim(&path, width - 1)?;
            let coeffs = data.chunks(width).map(|r| r[0]).collect();
            let centers: Vec<f64> = data.chunks(width).flat_map(|r| r[1..].iter().copied()).collect();
            PreparedIntegrand::Fixed(Integrand::rkhs_element(coeffs, PointSet::new(centers, d)?, kernel)?)
        }
    })
}

impl Context<'_> {
    fn build_points(&self, method: Method, n: usize, seed: u64) -> mmdpoints_core::Result<PointSet<f64>> {
        match method {
            Method::Iid => iid_points(self.target, n, seed),
            Method::Herding => kernel_herding(&self.emb, &self.cfg.herding.config(n, seed)),
            Method::SupportPoints => support_points(self.target, &self.cfg.support_points.config(n, seed)),
            Method::StationaryMmd => {
                let s = &self.cfg.stationary;
                let x0 = initial_points(n, self.target.dim(), s.init_jitter, seed)?;
                Ok(run_descent(&self.emb, &x0, &s.descent_config(seed))?.final_points)
            }
        }
    }

    fn run_cell(&self, method: Method, n: usize, seed: u64) -> std::result::Result<Vec<ResultRow>, String> {
        let start = Instant::now();
        let x = self.build_points(method, n, seed).map_err(|e| e.to_string())?;
        let wall_time_s = if self.cfg.record_wall_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        let mut rows = Vec::with_capacity(self.metrics.len());
        for metric in &self.metrics {
            let (name, value) = match metric {
                Metric::Mmd => ("mmd", mmd_squared(&self.emb, &x).map(|r| r.mmd)),
                Metric::Residual => ("residual", stationarity_residual(&self.emb, &x)),
                Metric::Integrand(name, PreparedIntegrand::GradSpanSelf) => (
                    name.as_str(),
                    Integrand::grad_span(x.clone(), self.kernel).integration_error(&x, self.target),
                ),
                Metric::Integrand(name, PreparedIntegrand::Fixed(f)) => {
                    (name.as_str(), f.integration_error(&x, self.target))
                }
            };
            let value = value.map_err(|e| format!("{name}: {e}"))?;
            if !value.is_finite() {
                return Err(format!("{name}: non-finite value {value}"));
            }
            rows.push(ResultRow {
                method: method.name().to_string(),
                n,
                seed,
                metric: name.to_string(),
                value,
                wall_time_s,
            });
        }
        Ok(rows)
    }
}

/// Runs the full grid. Setup problems (unreadable data, unsupported
/// kernel/target pairs) are errors; failures inside a cell are collected in
/// [`Outcome::errors`] and the remaining cells still run.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path) -> Result<Outcome> {
    cfg.validate()?;
    // Centering leaves every MMD and every integration error unchanged, so the
    // plain kernel is used throughout.
    let kernel = cfg.kernel_spec()?.kernel;
    let target = cfg.target.build(base)?;
    let d = target.dim();
    let emb = Embedding::new(kernel, &target)?;

    let mut metrics = Vec::new();
    for m in &cfg.metrics {
        metrics.push(if m == "residual" { Metric::Residual } else { Metric::Mmd });
    }
    for spec in &cfg.integrands {
        let prepared = prepare_integrand(spec, kernel, d, base)?;
        metrics.push(Metric::Integrand(spec.metric().to_string(), prepared));
    }
    let mut warnings = Vec::new();
    if cfg.methods.contains(&Method::StationaryMmd) {
        warnings = cfg.stationary.descent_config(0).warnings(d, kernel.kappa_bound());
    }
    let ctx = Context {
        cfg,
        target: &target,
        emb,
        kernel,
        metrics,
    };

    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &n in &cfg.n_grid {
            for r in 0..cfg.repetitions {
                cells.push((method, n, cell_seed(cfg.seed_base, method, n, r)));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .expect("thread pool");
    let results: Vec<_> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(method, n, seed)| ((method, n, seed), ctx.run_cell(method, n, seed)))
            .collect()
    });

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for ((method, n, seed), res) in results {
        match res {
            Ok(r) => rows.extend(r),
            Err(reason) => errors.push(CellError {
                method: method.name().to_string(),
                n,
                seed,
                reason,
            }),
        }
    }
    sort_rows(&mut rows);
    errors.sort_by(|a, b| (&a.method, a.n, a.seed).cmp(&(&b.method, b.n, b.seed)));
    let summary = summarize(&rows);
    Ok(Outcome {
        rows,
        errors,
        summary,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(*b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(*b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(*b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn cell_seeds_are_distinct() {
        let mut seeds = std::collections::BTreeSet::new();
        for m in Method::ALL {
            for n in [10, 30, 100] {
                for r in 0..20 {
                    assert!(seeds.insert(cell_seed(7, m, n, r)));
                }
            }
        }
        assert_eq!(
            cell_seed(0, Method::Iid, 10, 3).wrapping_add(5),
            cell_seed(5, Method::Iid, 10, 3)
        );
    }
}
