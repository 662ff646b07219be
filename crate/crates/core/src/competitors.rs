//! Asymptotic high-dimensional mean tests used as baselines: the
//! Bai–Saranadasa (BS), Chen–Qin (CQ) and Srivastava–Du (SD) statistics.
//!
//! All three are referred to the standard normal and reject for large
//! values. Everything is computed from `n`-sized Gram matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Map;

use crate::error::{Error, Result};
use crate::linstat::{trace_stats, DataMatrix, SufficientStats};
use crate::report::TestReport;
use crate::specfun::{std_normal_quantile, std_normal_sf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticResult {
    pub statistic: f64,
    /// `1 - Φ(statistic)`.
    pub pvalue: f64,
}

impl AsymptoticResult {
    fn new(statistic: f64) -> Result<Self> {
        if !statistic.is_finite() {
            return Err(Error::Degenerate(format!("statistic is not finite ({statistic})")));
        }
        Ok(Self {
            statistic,
            pvalue: std_normal_sf(statistic),
        })
    }

    /// `statistic >= z_α`.
    pub fn rejects(&self, alpha: f64) -> Result<bool> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
        }
        Ok(self.statistic >= std_normal_quantile(1.0 - alpha)?)
    }

    pub fn to_report(&self, method: &str, alpha: f64) -> Result<TestReport> {
        Ok(TestReport {
            method: method.to_string(),
            statistic: self.statistic,
            threshold: Some(std_normal_quantile(1.0 - alpha)?),
            pvalue: self.pvalue,
            reject: self.rejects(alpha)?,
            alpha,
            seed: None,
            config: Map::new(),
        })
    }
}

/// BS statistic.
pub fn bs_test(stats: &SufficientStats) -> Result<AsymptoticResult> {
    let n = stats.n() as f64;
    if stats.n() < 2 {
        return Err(Error::InsufficientSamples("BS needs n1 + n2 - 2 >= 2".into()));
    }
    let t = trace_stats(stats);
    let spread = t.tr_s2 - t.tr_s * t.tr_s / n;
    let var = 2.0 * n * (n + 1.0) / ((n + 2.0) * (n - 1.0)) * spread;
    if !(var > 0.0) {
        return Err(Error::Degenerate(format!(
            "BS variance estimate is not positive ({var})"
        )));
    }
    let num = stats.harmonic_scale() * stats.diff().norm_squared() - t.tr_s;
    AsymptoticResult::new(num / var.sqrt())
}

/// SD statistic. `tr(R²)` goes through the Gram matrix of the
/// standardized centered rows.
pub fn sd_test(stats: &SufficientStats) -> Result<AsymptoticResult> {
    if stats.n() < 3 {
        return Err(Error::InsufficientSamples("SD needs n1 + n2 - 2 >= 3".into()));
    }
    let (n, p) = (stats.n() as f64, stats.p() as f64);
    let t = trace_stats(stats);
    if let Some(index) = t.diag_s.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::ZeroVariance { index });
    }
    let form: f64 = stats
        .diff()
        .iter()
        .zip(t.diag_s.iter())
        .map(|(d, s)| d * d / s)
        .sum();
    let mut w = stats.centered().clone();
    for (j, mut col) in w.column_iter_mut().enumerate() {
        col /= (n * t.diag_s[j]).sqrt();
    }
    let tr_r2 = if w.ncols() > w.nrows() {
        (&w * w.transpose()).norm_squared()
    } else {
        w.tr_mul(&w).norm_squared()
    };
    let var = 2.0 * (tr_r2 - p * p / n) * (1.0 + tr_r2 / p.powf(1.5));
    if !(var > 0.0) {
        return Err(Error::Degenerate(format!(
            "SD variance estimate is not positive ({var})"
        )));
    }
    let num = stats.harmonic_scale() * form - n * p / (n - 2.0);
    AsymptoticResult::new(num / var.sqrt())
}

/// CQ numerator: the unbiased estimate of `‖μ₁ - μ₂‖²` that drops the
/// diagonal terms of each within-sample sum.
pub fn cq_numerator(x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    let g = CqGram::new(x, y)?;
    Ok(g.numerator())
}

/// CQ statistic with the leave-out variance estimate.
pub fn cq_test(x: &DataMatrix, y: &DataMatrix) -> Result<AsymptoticResult> {
    let g = CqGram::new(x, y)?;
    let sd = cq_standard_error(&g)?;
    AsymptoticResult::new(g.numerator() / sd)
}

struct CqGram {
    kxx: DMatrix<f64>,
    kyy: DMatrix<f64>,
    kxy: DMatrix<f64>,
}

impl CqGram {
    fn new(x: &DataMatrix, y: &DataMatrix) -> Result<Self> {
        if x.p() != y.p() {
            return Err(Error::DimensionMismatch(format!(
                "samples have {} and {} columns",
                x.p(),
                y.p()
            )));
        }
        if x.n() < 4 || y.n() < 4 {
            return Err(Error::InsufficientSamples(format!(
                "CQ needs at least 4 observations per group, got ({}, {})",
                x.n(),
                y.n()
            )));
        }
        let (xv, yv) = (x.values(), y.values());
        Ok(Self {
            kxx: xv * xv.transpose(),
            kyy: yv * yv.transpose(),
            kxy: xv * yv.transpose(),
        })
    }

    fn n1(&self) -> usize {
        self.kxx.nrows()
    }

    fn n2(&self) -> usize {
        self.kyy.nrows()
    }

    fn numerator(&self) -> f64 {
        let off = |k: &DMatrix<f64>| k.sum() - k.trace();
        let (a, b) = (self.n1() as f64, self.n2() as f64);
        off(&self.kxx) / (a * (a - 1.0)) + off(&self.kyy) / (b * (b - 1.0))
            - 2.0 * self.kxy.sum() / (a * b)
    }
}

/// `tr(Σ²)` estimate from one sample's Gram matrix, using leave-two-out means.
fn cq_trace_sq(k: &DMatrix<f64>) -> f64 {
    let n = k.nrows();
    let rows: Vec<f64> = k.row_iter().map(|r| r.sum()).collect();
    let m = (n - 2) as f64;
    let mut acc = 0.0;
    for j in 0..n {
        for l in 0..n {
            if j == l {
                continue;
            }
            let a = k[(j, l)] - (rows[j] - k[(j, j)] - k[(j, l)]) / m;
            let b = k[(l, j)] - (rows[l] - k[(l, l)] - k[(l, j)]) / m;
            acc += a * b;
        }
    }
    acc / (n * (n - 1)) as f64
}

/// `tr(Σ₁Σ₂)` estimate from the cross Gram matrix, using leave-one-out means.
fn cq_trace_cross(kxy: &DMatrix<f64>) -> f64 {
    let (n1, n2) = kxy.shape();
    let rows: Vec<f64> = kxy.row_iter().map(|r| r.sum()).collect();
    let cols: Vec<f64> = kxy.column_iter().map(|c| c.sum()).collect();
    let mut acc = 0.0;
    for l in 0..n1 {
        for j in 0..n2 {
            let v = kxy[(l, j)];
            let a = v - (cols[j] - v) / (n1 - 1) as f64;
            let b = v - (rows[l] - v) / (n2 - 1) as f64;
            acc += a * b;
        }
    }
    acc / (n1 * n2) as f64
}

/// Standard error of the CQ numerator:
/// `σ̂² = 2 tr(Σ₁²)/(n₁(n₁-1)) + 2 tr(Σ₂²)/(n₂(n₂-1)) + 4 tr(Σ₁Σ₂)/(n₁n₂)`
/// with each trace replaced by its leave-out estimate.
fn cq_standard_error(g: &CqGram) -> Result<f64> {
    let (a, b) = (g.n1() as f64, g.n2() as f64);
    let var = 2.0 * cq_trace_sq(&g.kxx) / (a * (a - 1.0))
        + 2.0 * cq_trace_sq(&g.kyy) / (b * (b - 1.0))
        + 4.0 * cq_trace_cross(&g.kxy) / (a * b);
    if !(var > 0.0) {
        return Err(Error::Degenerate(format!(
            "CQ variance estimate is not positive ({var})"
        )));
    }
    Ok(var.sqrt())
}
