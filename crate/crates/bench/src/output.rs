//! Result rows, summaries and their on-disk formats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::rate::{fit_log_log, RateFit};

pub const RESULTS_HEADER: &str = "method,n,seed,metric,value,wall_time_s";
pub const ERRORS_HEADER: &str = "method,n,seed,reason";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub n: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
    pub wall_time_s: f64,
}

/// A grid cell that failed; the run continues without its rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub method: String,
    pub n: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
    pub stderr: f64,
}

/// `stats[method][metric][n]` and `rates[method][metric]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub stats: BTreeMap<String, BTreeMap<String, BTreeMap<usize, Stats>>>,
    pub rates: BTreeMap<String, BTreeMap<String, RateFit>>,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn stats(values: &[f64]) -> Stats {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let count = v.len();
    let mean = v.iter().sum::<f64>() / count as f64;
    let std = if count > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
    } else {
        0.0
    };
    Stats {
        count,
        median: quantile(&v, 0.5),
        q25: quantile(&v, 0.25),
        q75: quantile(&v, 0.75),
        mean,
        std,
        stderr: std / (count as f64).sqrt(),
    }
}

/// Median value per `n` for one (method, metric), in increasing `n`.
pub fn median_by_n(rows: &[ResultRow], method: &str, metric: &str) -> Vec<(usize, f64)> {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.method == method && r.metric == metric) {
        by_n.entry(r.n).or_default().push(r.value);
    }
    by_n.into_iter().map(|(n, v)| (n, stats(&v).median)).collect()
}

/// Per-cell statistics plus a rate fit wherever at least two sizes have
/// positive medians.
pub fn summarize(rows: &[ResultRow]) -> Summary {
    let mut grouped: BTreeMap<String, BTreeMap<String, BTreeMap<usize, Vec<f64>>>> = BTreeMap::new();
    for r in rows {
        grouped
            .entry(r.method.clone())
            .or_default()
            .entry(r.metric.clone())
            .or_default()
            .entry(r.n)
            .or_default()
            .push(r.value);
    }
    let mut summary = Summary::default();
    for (method, metrics) in grouped {
        for (metric, by_n) in metrics {
            let cells: BTreeMap<usize, Stats> = by_n.iter().map(|(n, v)| (*n, stats(v))).collect();
            let medians: Vec<(usize, f64)> = cells.iter().map(|(n, s)| (*n, s.median)).collect();
            if let Ok(fit) = fit_log_log(&medians) {
                summary
                    .rates
                    .entry(method.clone())
                    .or_default()
                    .insert(metric.clone(), fit);
            }
            summary.stats.entry(method.clone()).or_default().insert(metric, cells);
        }
    }
    summary
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| (&a.method, a.n, a.seed, &a.metric).cmp(&(&b.method, b.n, b.seed, &b.metric)));
}

/// CSV text with values at 17 significant digits.
pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{:.16e},{:.6}",
            r.method, r.n, r.seed, r.metric, r.value, r.wall_time_s
        )
        .unwrap();
    }
    s
}

pub fn parse_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| BenchError::data(path, e.to_string()))?;
    let header = reader.headers().map_err(|e| BenchError::data(path, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != RESULTS_HEADER {
        return Err(BenchError::data(path, format!("expected header `{RESULTS_HEADER}`")));
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| BenchError::data(path, format!("row {}: {e}", i + 2))))
        .collect()
}

fn errors_csv(errors: &[CellError]) -> String {
    let mut s = String::from(ERRORS_HEADER);
    s.push('\n');
    for e in errors {
        let reason = e.reason.replace('"', "'").replace('\n', " ");
        writeln!(s, "{},{},{},\"{}\"", e.method, e.n, e.seed, reason).unwrap();
    }
    s
}

pub struct OutputPaths {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub errors: PathBuf,
}

/// Rewrites `results.csv`, `summary.json` and `errors.csv` under `out_dir`.
pub fn write_results(
    out_dir: &Path,
    rows: &[ResultRow],
    summary: &Summary,
    errors: &[CellError],
) -> Result<OutputPaths> {
    fs::create_dir_all(out_dir).map_err(|e| BenchError::io(out_dir, e))?;
    let paths = OutputPaths {
        results: out_dir.join("results.csv"),
        summary: out_dir.join("summary.json"),
        errors: out_dir.join("errors.csv"),
    };
    let json = serde_json::to_string_pretty(summary).expect("summary serializes") + "\n";
    for (path, text) in [
        (&paths.results, results_csv(rows)),
        (&paths.summary, json),
        (&paths.errors, errors_csv(errors)),
    ] {
        fs::write(path, text).map_err(|e| BenchError::io(path.as_path(), e))?;
    }
    Ok(paths)
}
