//! Log-log convergence-rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::output::{median_by_n, ResultRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `ln value` on `ln n`.
pub fn fit_log_log(points: &[(usize, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(BenchError::Rate(format!("need at least 2 sizes, got {}", points.len())));
    }
    if let Some((n, v)) = points.iter().find(|(n, v)| *n == 0 || !(*v > 0.0) || !v.is_finite()) {
        return Err(BenchError::Rate(format!("nonpositive value {v} at n = {n}")));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(BenchError::Rate("need at least 2 distinct sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    // A flat line is fit perfectly.
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit { slope, intercept, r2 })
}

/// Fits the per-size medians of one (method, metric) pair.
pub fn fit_rate(rows: &[ResultRow], method: &str, metric: &str) -> Result<RateFit> {
    let medians = median_by_n(rows, method, metric);
    if medians.is_empty() {
        return Err(BenchError::Rate(format!(
            "no rows for method `{method}`, metric `{metric}`"
        )));
    }
    fit_log_log(&medians)
}
