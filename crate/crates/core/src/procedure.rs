//! The averaged random-projection test.
//!
//! `θ̄*` is the mean of `m` single-projection p-values. Its null law depends
//! on `(n1, n2, k, m, kind)` and on the data dimension `p`, but not on the
//! mean or covariance, so it is tabulated once by simulation under `Σ = I`
//! and stored as a [`NullCalibration`]. The test rejects when `θ̄*` falls
//! strictly below the empirical `α`-quantile of that table.
//!
//! Work is split into index-keyed tasks whose random streams derive from the
//! configured seed, and sums run in index order, so results do not depend on
//! the number of worker threads.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand_distr::{ChiSquared, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;

use crate::error::{Error, Result};
use crate::hotelling::{choose_k, t2_projected};
use crate::linstat::{project_stats, summarize, DataMatrix, SufficientStats};
use crate::projections::{ProjectionKind, SpanBasis};
use crate::randsrc::{fill_gaussian, gaussian_matrix_from, StreamKey};
use crate::report::TestReport;

pub const CALIBRATION_VERSION: u32 = 1;

/// Projected dimension: fixed, or chosen by minimizing the critical value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KChoice {
    #[default]
    Auto,
    Fixed(usize),
}

impl fmt::Display for KChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KChoice::Auto => f.write_str("auto"),
            KChoice::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for KChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KChoice::Auto);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .map(KChoice::Fixed)
            .ok_or_else(|| Error::Config(format!("k must be a positive integer or \"auto\", got {s:?}")))
    }
}

impl Serialize for KChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KChoice::Auto => s.serialize_str("auto"),
            KChoice::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for KChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            serde_json::Value::Number(n) => n
                .as_u64()
                .filter(|&k| k > 0)
                .map(|k| KChoice::Fixed(k as usize))
                .ok_or_else(|| serde::de::Error::custom("k must be a positive integer")),
            other => Err(serde::de::Error::custom(format!("invalid k: {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RapttConfig {
    pub m: usize,
    pub k: KChoice,
    pub kind: ProjectionKind,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for RapttConfig {
    fn default() -> Self {
        Self {
            m: 1000,
            k: KChoice::Auto,
            kind: ProjectionKind::Haar,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl RapttConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// The projected dimension for sample sizes `(n1, n2)`.
    pub fn resolve_k(&self, n1: usize, n2: usize) -> Result<usize> {
        let n = (n1 + n2).saturating_sub(2);
        let k = match self.k {
            KChoice::Auto => choose_k(n1, n2, self.alpha)?,
            KChoice::Fixed(k) => k,
        };
        if k == 0 || k >= n {
            return Err(Error::Domain(format!(
                "projected dimension must satisfy 1 <= k < n = {n}, got {k}"
            )));
        }
        Ok(k)
    }
}

/// Key of the projection stream used for tests on observed data.
pub fn test_key(seed: u64) -> StreamKey {
    StreamKey::new(seed).child("average", 0)
}

/// Single-projection p-values for projections `0..m` drawn from `key`.
pub fn projection_pvalues(
    stats: &SufficientStats,
    k: usize,
    m: usize,
    kind: ProjectionKind,
    key: &StreamKey,
    parallel: bool,
) -> Result<Vec<f64>> {
    let p = stats.p();
    let one = |i: usize| -> Result<f64> {
        let basis = SpanBasis::draw(kind, p, k, &key.child("projection", i as u64))?;
        Ok(t2_projected(&project_stats(stats, &basis)?)?.pvalue)
    };
    if parallel {
        (0..m).into_par_iter().map(one).collect()
    } else {
        (0..m).map(one).collect()
    }
}

fn ordered_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `θ̄*` using projections drawn from an explicit stream key.
pub fn average_pvalue_keyed(
    stats: &SufficientStats,
    k: usize,
    m: usize,
    kind: ProjectionKind,
    key: &StreamKey,
    parallel: bool,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::Config("m must be at least 1".into()));
    }
    Ok(ordered_mean(&projection_pvalues(stats, k, m, kind, key, parallel)?))
}

/// `θ̄*` for observed statistics.
pub fn average_pvalue(stats: &SufficientStats, config: &RapttConfig) -> Result<f64> {
    config.validate()?;
    let k = config.resolve_k(stats.n1(), stats.n2())?;
    average_pvalue_keyed(stats, k, config.m, config.kind, &test_key(config.seed), true)
}

/// Sorted Monte Carlo draws of `θ̄*` under the null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullCalibration {
    pub version: u32,
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub big_k: usize,
    pub kind: ProjectionKind,
    pub seed: u64,
    /// Data dimension simulated. Absent in files that predate the field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    pub theta_bars: Vec<f64>,
}

/// Parameters a calibration must agree with before it can be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalibrationKey {
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub m: usize,
    pub kind: ProjectionKind,
    pub p: usize,
}

impl fmt::Display for CalibrationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n1={} n2={} k={} m={} kind={} p={}",
            self.n1, self.n2, self.k, self.m, self.kind, self.p
        )
    }
}

impl NullCalibration {
    /// Wraps draws, sorting them and checking the range.
    pub fn from_draws(key: CalibrationKey, seed: u64, mut draws: Vec<f64>) -> Result<Self> {
        draws.sort_by(f64::total_cmp);
        let cal = Self {
            version: CALIBRATION_VERSION,
            n1: key.n1,
            n2: key.n2,
            k: key.k,
            m: key.m,
            big_k: draws.len(),
            kind: key.kind,
            seed,
            p: Some(key.p),
            theta_bars: draws,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CALIBRATION_VERSION {
            return Err(Error::InvalidCalibration(format!(
                "unsupported version {}",
                self.version
            )));
        }
        if self.theta_bars.is_empty() {
            return Err(Error::InvalidCalibration("no draws".into()));
        }
        if self.theta_bars.len() != self.big_k {
            return Err(Error::InvalidCalibration(format!(
                "K = {} but {} draws stored",
                self.big_k,
                self.theta_bars.len()
            )));
        }
        if let Some(v) = self.theta_bars.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidCalibration(format!("draw {v} outside [0,1]")));
        }
        if self.theta_bars.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidCalibration("draws are not sorted".into()));
        }
        Ok(())
    }

    pub fn key(&self) -> Option<CalibrationKey> {
        self.p.map(|p| CalibrationKey {
            n1: self.n1,
            n2: self.n2,
            k: self.k,
            m: self.m,
            kind: self.kind,
            p,
        })
    }

    /// Refuses calibrations built for a different problem.
    pub fn check_matches(&self, want: &CalibrationKey) -> Result<()> {
        let same = self.n1 == want.n1
            && self.n2 == want.n2
            && self.k == want.k
            && self.m == want.m
            && self.kind == want.kind;
        match self.p {
            Some(p) if same && p == want.p => Ok(()),
            None if same => {
                log::warn!("calibration file does not record p; assuming p = {}", want.p);
                Ok(())
            }
            _ => Err(Error::CalibrationMismatch(format!(
                "calibration has n1={} n2={} k={} m={} kind={} p={}, test needs {want}",
                self.n1,
                self.n2,
                self.k,
                self.m,
                self.kind,
                self.p.map_or("?".to_string(), |p| p.to_string()),
            ))),
        }
    }

    /// The `⌈αK⌉`-th smallest draw.
    pub fn cutoff(&self, alpha: f64) -> Result<f64> {
        cutoff(self, alpha)
    }

    /// Fraction of draws at or below `theta`.
    pub fn empirical_pvalue(&self, theta: f64) -> f64 {
        self.theta_bars.partition_point(|&v| v <= theta) as f64 / self.theta_bars.len() as f64
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cal: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cal.validate()?;
        Ok(cal)
    }
}

pub fn cutoff(cal: &NullCalibration, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let draws = &cal.theta_bars;
    if draws.is_empty() {
        return Err(Error::InvalidCalibration("no draws".into()));
    }
    let rank = ((alpha * draws.len() as f64 - 1e-9).ceil() as usize).clamp(1, draws.len());
    Ok(draws[rank - 1])
}

/// Null sufficient statistics in dimension `p` with `Σ = I` and zero means.
///
/// Only the difference of means matters, so the whole mean difference is
/// stored in `mean_x`.
pub fn null_statistics(n1: usize, n2: usize, p: usize, key: &StreamKey) -> Result<SufficientStats> {
    let n = n1 + n2 - 2;
    let mut rng = key.stream();
    let scale = (1.0 / n1 as f64 + 1.0 / n2 as f64).sqrt();
    let mut d = DVector::zeros(p);
    fill_gaussian(&mut rng, d.as_mut_slice());
    d *= scale;
    let z = gaussian_matrix_from(&mut rng, n, p);
    SufficientStats::from_factor(d, DVector::zeros(p), z, n1, n2)
}

/// Null statistics reduced to dimension `n + 1`.
///
/// Stack `[d/c, Z']` as a `p x (n+1)` Gaussian matrix and take its QR
/// factorization. Its triangular factor `T` has independent entries,
/// `T_ii ~ χ_{p-i}` and `T_ij ~ N(0,1)` above the diagonal. Under `Σ = I` a
/// Haar projection of the rotated problem is a Haar projection of the
/// triangular one, and the projected statistic only depends on the span of
/// the projection, so simulating `(c T[:,0], T[:,1..]')` with Gaussian
/// `(n+1) x k` projections reproduces the joint law of the `m` p-values at
/// dimension `p` exactly. Requires `p >= n + 1`.
pub fn reduced_null_statistics(
    n1: usize,
    n2: usize,
    p: usize,
    key: &StreamKey,
) -> Result<SufficientStats> {
    let n = n1 + n2 - 2;
    let q = n + 1;
    if p < q {
        return Err(Error::Domain(format!("reduction needs p >= n + 1 = {q}, got {p}")));
    }
    let mut rng = key.stream();
    let mut t = DMatrix::zeros(q, q);
    for j in 0..q {
        let mut col = vec![0.0; j];
        fill_gaussian(&mut rng, &mut col);
        for (i, v) in col.into_iter().enumerate() {
            t[(i, j)] = v;
        }
        let chi = ChiSquared::new((p - j) as f64)
            .map_err(|e| Error::Domain(e.to_string()))?
            .sample(&mut rng);
        t[(j, j)] = chi.sqrt();
    }
    let scale = (1.0 / n1 as f64 + 1.0 / n2 as f64).sqrt();
    let d = t.column(0) * scale;
    let z = t.columns(1, n).transpose();
    SufficientStats::from_factor(d, DVector::zeros(q), z, n1, n2)
}

/// One null draw of `θ̄*` at data dimension `p`.
pub fn null_theta_bar(
    n1: usize,
    n2: usize,
    p: usize,
    k: usize,
    m: usize,
    kind: ProjectionKind,
    key: &StreamKey,
) -> Result<f64> {
    let n = n1 + n2 - 2;
    let data_key = key.child("data", 0);
    let stats = if kind == ProjectionKind::Haar && p > n {
        reduced_null_statistics(n1, n2, p, &data_key)?
    } else {
        null_statistics(n1, n2, p, &data_key)?
    };
    let kind = if stats.p() == p { kind } else { ProjectionKind::Haar };
    average_pvalue_keyed(&stats, k, m, kind, &key.child("projections", 0), false)
}

/// Simulates `big_k` null draws of `θ̄*` for data of dimension `p`.
pub fn calibrate_null(
    n1: usize,
    n2: usize,
    p: usize,
    config: &RapttConfig,
    big_k: usize,
) -> Result<NullCalibration> {
    config.validate()?;
    if big_k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    if n1 < 2 || n2 < 2 {
        return Err(Error::InsufficientSamples(format!(
            "need n1, n2 >= 2, got ({n1}, {n2})"
        )));
    }
    if p == 0 {
        return Err(Error::Config("p must be positive".into()));
    }
    let k = config.resolve_k(n1, n2)?;
    if k > p {
        return Err(Error::Domain(format!("k = {k} exceeds p = {p}")));
    }
    let root = StreamKey::new(config.seed).child("calibrate", 0);
    let draws = (0..big_k)
        .into_par_iter()
        .map(|r| null_theta_bar(n1, n2, p, k, config.m, config.kind, &root.child("replicate", r as u64)))
        .collect::<Result<Vec<_>>>()?;
    let key = CalibrationKey {
        n1,
        n2,
        k,
        m: config.m,
        kind: config.kind,
        p,
    };
    NullCalibration::from_draws(key, config.seed, draws)
}

/// Runs the calibrated test on two samples.
pub fn raptt_test(
    x: &DataMatrix,
    y: &DataMatrix,
    config: &RapttConfig,
    cal: &NullCalibration,
) -> Result<TestReport> {
    config.validate()?;
    let stats = summarize(x, y)?;
    raptt_test_stats(&stats, config, cal)
}

pub fn raptt_test_stats(
    stats: &SufficientStats,
    config: &RapttConfig,
    cal: &NullCalibration,
) -> Result<TestReport> {
    let k = config.resolve_k(stats.n1(), stats.n2())?;
    cal.check_matches(&CalibrationKey {
        n1: stats.n1(),
        n2: stats.n2(),
        k,
        m: config.m,
        kind: config.kind,
        p: stats.p(),
    })?;
    let theta = average_pvalue_keyed(stats, k, config.m, config.kind, &test_key(config.seed), true)?;
    let u = cal.cutoff(config.alpha)?;
    let echo = json!({
        "n1": stats.n1(),
        "n2": stats.n2(),
        "p": stats.p(),
        "k": k,
        "m": config.m,
        "kind": config.kind,
        "K": cal.big_k,
        "calibration_seed": cal.seed,
    });
    Ok(TestReport {
        method: format!("raptt-{}", config.kind),
        statistic: theta,
        threshold: Some(u),
        pvalue: cal.empirical_pvalue(theta),
        reject: theta < u,
        alpha: config.alpha,
        seed: Some(config.seed),
        config: echo.as_object().cloned().unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal_from(draws: Vec<f64>) -> NullCalibration {
        let key = CalibrationKey {
            n1: 5,
            n2: 5,
            k: 2,
            m: 3,
            kind: ProjectionKind::Haar,
            p: 10,
        };
        NullCalibration::from_draws(key, 1, draws).unwrap()
    }

    #[test]
    fn cutoff_order_statistic() {
        let cal = cal_from((1..=20).rev().map(|i| i as f64 / 21.0).collect());
        assert_eq!(cal.cutoff(1.0 / 20.0).unwrap(), 1.0 / 21.0);
        assert_eq!(cal.cutoff(0.1).unwrap(), 2.0 / 21.0);
        assert_eq!(cal.cutoff(0.11).unwrap(), 3.0 / 21.0);
        let flat = cal_from(vec![0.3; 7]);
        assert_eq!(flat.cutoff(0.05).unwrap(), 0.3);
        assert!(flat.cutoff(0.0).is_err());
    }

    #[test]
    fn empirical_pvalue_counts_ties() {
        let cal = cal_from(vec![0.1, 0.2, 0.2, 0.4]);
        assert_eq!(cal.empirical_pvalue(0.05), 0.0);
        assert_eq!(cal.empirical_pvalue(0.2), 0.75);
        assert_eq!(cal.empirical_pvalue(1.0), 1.0);
    }

    #[test]
    fn k_choice_parsing() {
        assert_eq!("auto".parse::<KChoice>().unwrap(), KChoice::Auto);
        assert_eq!("12".parse::<KChoice>().unwrap(), KChoice::Fixed(12));
        assert!("0".parse::<KChoice>().is_err());
        let cfg = RapttConfig { k: KChoice::Fixed(4), ..Default::default() };
        let back: RapttConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn calibration_rejects_bad_files() {
        let mut cal = cal_from(vec![0.1, 0.5]);
        cal.theta_bars = vec![0.5, 0.1];
        assert!(cal.validate().is_err());
        cal.theta_bars = vec![0.1, 1.5];
        assert!(cal.validate().is_err());
        cal.theta_bars = vec![0.1];
        assert!(cal.validate().is_err());
    }

    #[test]
    fn mismatch_is_refused() {
        let cal = cal_from(vec![0.5]);
        let mut want = cal.key().unwrap();
        assert!(cal.check_matches(&want).is_ok());
        want.m = 4;
        assert!(matches!(cal.check_matches(&want), Err(Error::CalibrationMismatch(_))));
        want.m = 3;
        want.p = 11;
        assert!(cal.check_matches(&want).is_err());
    }

    #[test]
    fn reduced_statistics_shape() {
        let s = reduced_null_statistics(4, 3, 50, &StreamKey::new(3)).unwrap();
        assert_eq!((s.p(), s.centered().nrows()), (6, 5));
        assert!(reduced_null_statistics(4, 3, 5, &StreamKey::new(3)).is_err());
    }

    #[test]
    fn calibration_is_sorted_and_in_range() {
        let cfg = RapttConfig { m: 4, k: KChoice::Fixed(2), seed: 9, ..Default::default() };
        for kind in ProjectionKind::ALL {
            let cal = calibrate_null(5, 4, 12, &RapttConfig { kind, ..cfg }, 30).unwrap();
            assert_eq!(cal.theta_bars.len(), 30);
            assert!(cal.validate().is_ok());
        }
    }
}
