use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::competitors::{bs_test, cq_test, sd_test};
use crate::covariance::{make_sigma, CovarianceSpec};
use crate::error::{Error, Result};
use crate::gof::{binomial_se, clopper_pearson};
use crate::hotelling::{choose_k, t2_projected};
use crate::linstat::{project_stats, summarize, DataMatrix};
use crate::procedure::{average_pvalue_keyed, calibrate_null, CalibrationKey, NullCalibration};
use crate::projections::{ProjectionKind, SpanBasis};
use crate::randsrc::StreamKey;

use super::alternatives::{make_alternative, AlternativeSpec};
use super::config::{CalibrationMode, ExperimentConfig, Method};
use super::sampling::{null_draws_under, pooled_null_calibration, sample_dataset};

/// One row of a power table: rejection counts per method.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    /// `None` for the null row.
    pub alternative: Option<u8>,
    pub sparsity: Option<f64>,
    pub rejections: Vec<usize>,
}

impl PowerRow {
    pub fn label(&self) -> String {
        match (self.alternative, self.sparsity) {
            (Some(a), Some(s)) => format!("Alt{a} {}%", fmt_percent(s)),
            _ => "Null".to_string(),
        }
    }
}

fn fmt_percent(s: f64) -> String {
    let v = s * 100.0;
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round())
    } else {
        format!("{v}")
    }
}

/// Empirical rejection rates in the layout of a size/power table.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTable {
    pub config: ExperimentConfig,
    pub methods: Vec<Method>,
    pub rows: Vec<PowerRow>,
    /// `u_α` used by each RAPTT column.
    pub cutoffs: Vec<(Method, f64)>,
}

impl PowerTable {
    pub fn runs(&self) -> usize {
        self.config.runs
    }

    pub fn rate(&self, row: usize, method: usize) -> f64 {
        self.rows[row].rejections[method] as f64 / self.runs() as f64
    }

    pub fn se(&self, row: usize, method: usize) -> f64 {
        binomial_se(self.rate(row, method), self.runs())
    }

    /// 95% Clopper–Pearson interval for a cell.
    pub fn interval(&self, row: usize, method: usize) -> Result<(f64, f64)> {
        clopper_pearson(self.rows[row].rejections[method], self.runs(), 0.95)
    }

    pub fn column(&self, method: Method) -> Option<usize> {
        self.methods.iter().position(|&m| m == method)
    }

    pub fn null_row(&self) -> Option<usize> {
        self.rows.iter().position(|r| r.alternative.is_none())
    }

    pub fn find_row(&self, alternative: u8, sparsity: f64) -> Option<usize> {
        self.rows.iter().position(|r| {
            r.alternative == Some(alternative)
                && r.sparsity.is_some_and(|s| (s - sparsity).abs() < 1e-12)
        })
    }

    fn header_comments(&self) -> String {
        let mut out = String::new();
        for line in self.config.to_string().lines() {
            let _ = writeln!(out, "# {line}");
        }
        for (m, u) in &self.cutoffs {
            let _ = writeln!(out, "# cutoff {m} = {u}");
        }
        out
    }

    /// CSV with the configuration as leading `#` lines.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["alternative".to_string(), "sparsity".to_string()];
        header.extend(self.methods.iter().map(|m| m.name().to_string()));
        header.extend(self.methods.iter().map(|m| format!("{m}_se")));
        w.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![
                row.alternative.map_or("null".into(), |a| a.to_string()),
                row.sparsity.map_or(String::new(), |s| s.to_string()),
            ];
            rec.extend((0..self.methods.len()).map(|j| format!("{:.4}", self.rate(i, j))));
            rec.extend((0..self.methods.len()).map(|j| format!("{:.4}", self.se(i, j))));
            w.write_record(&rec)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .expect("csv output is utf-8");
        Ok(self.header_comments() + &body)
    }

    /// Aligned text table.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "Σ{}  p={}  n1={}  n2={}  runs={}  m={}  K={}  seed={}\n",
            self.config.sigma_id,
            self.config.p,
            self.config.n1,
            self.config.n2,
            self.runs(),
            self.config.m,
            self.config.big_k,
            self.config.seed
        );
        let _ = write!(out, "{:<12}", "");
        for m in &self.methods {
            let _ = write!(out, "{:>13}", m.name());
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "{:<12}", row.label());
            for j in 0..self.methods.len() {
                let _ = write!(out, "{:>13}", format!("{:.3}±{:.3}", self.rate(i, j), self.se(i, j)));
            }
            out.push('\n');
        }
        out
    }
}

/// Calibrations for every RAPTT column of the configuration.
pub fn build_calibrations(cfg: &ExperimentConfig) -> Result<Vec<NullCalibration>> {
    let kinds: Vec<ProjectionKind> = cfg
        .methods
        .iter()
        .filter_map(|m| match m {
            Method::Raptt(kind) => Some(*kind),
            _ => None,
        })
        .collect();
    kinds
        .into_iter()
        .map(|kind| calibration_for(cfg, kind))
        .collect()
}

fn calibration_for(cfg: &ExperimentConfig, kind: ProjectionKind) -> Result<NullCalibration> {
    let rc = cfg.raptt(kind);
    match cfg.calibration {
        CalibrationMode::Identity => calibrate_null(cfg.n1, cfg.n2, cfg.p, &rc, cfg.big_k),
        CalibrationMode::Matched => {
            let sigma = make_sigma(cfg.sigma_id, cfg.p)?;
            let key = StreamKey::new(cfg.seed).child("matched", cfg.sigma_id as u64);
            let draws = null_draws_under(cfg.n1, cfg.n2, &sigma, None, &rc, cfg.big_k, &key)?;
            let ckey = CalibrationKey {
                n1: cfg.n1,
                n2: cfg.n2,
                k: rc.resolve_k(cfg.n1, cfg.n2)?,
                m: cfg.m,
                kind,
                p: cfg.p,
            };
            NullCalibration::from_draws(ckey, cfg.seed, draws)
        }
        CalibrationMode::Pooled => {
            let sigmas: Vec<CovarianceSpec> = (1..=4).filter_map(|id| make_sigma(id, cfg.p).ok()).collect();
            let each = cfg.big_k.div_ceil(sigmas.len());
            let (cal, homogeneity) = pooled_null_calibration(cfg.n1, cfg.n2, &sigmas, &rc, each)?;
            if homogeneity < 0.01 {
                log::warn!("pooled {kind} null samples differ across structures (homogeneity p = {homogeneity:.2e})");
            }
            Ok(cal)
        }
    }
}

struct RapttPlan {
    kind: ProjectionKind,
    k: usize,
    cutoff: f64,
}

fn decide(
    method: Method,
    x: &DataMatrix,
    y: &DataMatrix,
    plans: &[RapttPlan],
    m: usize,
    alpha: f64,
    key: &StreamKey,
) -> Result<bool> {
    let stats = summarize(x, y)?;
    match method {
        Method::Raptt(kind) => {
            let plan = plans
                .iter()
                .find(|p| p.kind == kind)
                .ok_or_else(|| Error::Config(format!("no calibration for {kind}")))?;
            let pkey = key.child("raptt", kind as u64);
            let theta = average_pvalue_keyed(&stats, plan.k, m, kind, &pkey, false)?;
            Ok(theta < plan.cutoff)
        }
        Method::Cq => cq_test(x, y)?.rejects(alpha),
        Method::Sd => sd_test(&stats)?.rejects(alpha),
        Method::Bs => bs_test(&stats)?.rejects(alpha),
    }
}

enum RowMean {
    Null,
    Fixed(AlternativeSpec),
    PerRun(u8, f64),
}

/// Builds the calibrations and runs the experiment.
pub fn run_power_experiment(cfg: &ExperimentConfig) -> Result<PowerTable> {
    let cals = build_calibrations(cfg)?;
    run_power_experiment_with(cfg, &cals)
}

/// Runs the experiment with existing calibrations (one per RAPTT column).
pub fn run_power_experiment_with(
    cfg: &ExperimentConfig,
    cals: &[NullCalibration],
) -> Result<PowerTable> {
    cfg.validate()?;
    let sigma = make_sigma(cfg.sigma_id, cfg.p)?;
    let mut plans = Vec::new();
    let mut cutoffs = Vec::new();
    for method in &cfg.methods {
        if let Method::Raptt(kind) = *method {
            let k = cfg.raptt(kind).resolve_k(cfg.n1, cfg.n2)?;
            let cal = cals
                .iter()
                .find(|c| c.kind == kind)
                .ok_or_else(|| Error::Config(format!("missing calibration for {kind}")))?;
            cal.check_matches(&CalibrationKey {
                n1: cfg.n1,
                n2: cfg.n2,
                k,
                m: cfg.m,
                kind,
                p: cfg.p,
            })?;
            let cutoff = cal.cutoff(cfg.alpha)?;
            plans.push(RapttPlan { kind, k, cutoff });
            cutoffs.push((*method, cutoff));
        }
    }

    let root = StreamKey::new(cfg.seed).child("experiment", 0);
    let mut layout: Vec<(Option<u8>, Option<f64>)> = Vec::new();
    for &a in &cfg.alternatives {
        for &s in &cfg.sparsities {
            layout.push((Some(a), Some(s)));
        }
    }
    if cfg.include_null {
        layout.push((None, None));
    }

    let mut rows = Vec::with_capacity(layout.len());
    for (ri, &(alt, sp)) in layout.iter().enumerate() {
        let row_key = root.child("row", ri as u64);
        let mean = match (alt, sp) {
            (Some(a), Some(s)) if cfg.fixed_alternative => {
                RowMean::Fixed(make_alternative(a, s, &sigma, &row_key.child("alternative", 0))?)
            }
            (Some(a), Some(s)) => RowMean::PerRun(a, s),
            _ => RowMean::Null,
        };
        let decisions = (0..cfg.runs)
            .into_par_iter()
            .map(|r| run_once(cfg, &sigma, &mean, &plans, &row_key.child("run", r as u64)))
            .collect::<Result<Vec<_>>>()?;
        let mut rejections = vec![0; cfg.methods.len()];
        for d in &decisions {
            for (c, &rej) in rejections.iter_mut().zip(d) {
                *c += rej as usize;
            }
        }
        rows.push(PowerRow {
            alternative: alt,
            sparsity: sp,
            rejections,
        });
    }
    Ok(PowerTable {
        config: cfg.clone(),
        methods: cfg.methods.clone(),
        rows,
        cutoffs,
    })
}

fn run_once(
    cfg: &ExperimentConfig,
    sigma: &CovarianceSpec,
    mean: &RowMean,
    plans: &[RapttPlan],
    key: &StreamKey,
) -> Result<Vec<bool>> {
    let drawn;
    let mu2 = match mean {
        RowMean::Null => None,
        RowMean::Fixed(spec) => Some(&spec.mu2),
        RowMean::PerRun(a, s) => {
            drawn = make_alternative(*a, *s, sigma, &key.child("alternative", 0))?;
            Some(&drawn.mu2)
        }
    };
    let zero = DVector::zeros(cfg.p);
    let x = sample_dataset(cfg.n1, &zero, sigma, &key.child("x", 0))?;
    let y = sample_dataset(cfg.n2, mu2.unwrap_or(&zero), sigma, &key.child("y", 0))?;
    cfg.methods
        .iter()
        .map(|&m| decide(m, &x, &y, plans, cfg.m, cfg.alpha, key))
        .collect()
}

/// Single-projection power over a grid of projected dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct KRatioRow {
    pub alternative: u8,
    pub sparsity: f64,
    pub k_star: usize,
    /// `(k, power)` sorted by `k`; always contains `k_star`.
    pub powers: Vec<(usize, f64)>,
}

impl KRatioRow {
    pub fn power_at(&self, k: usize) -> Option<f64> {
        self.powers.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }

    /// Power at the recommended `k` over the best power on the grid.
    pub fn ratio(&self) -> f64 {
        let best = self.powers.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        let at = self.power_at(self.k_star).unwrap_or(0.0);
        if best == 0.0 {
            1.0
        } else {
            at / best
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KRatioTable {
    pub config: ExperimentConfig,
    pub rows: Vec<KRatioRow>,
}

impl KRatioTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        for line in self.config.to_string().lines() {
            let _ = writeln!(out, "# {line}");
        }
        let ks: Vec<usize> = self.rows.first().map_or(Vec::new(), |r| r.powers.iter().map(|p| p.0).collect());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["alternative".to_string(), "sparsity".into(), "k_star".into()];
        header.extend(ks.iter().map(|k| format!("power_k{k}")));
        header.push("ratio".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.alternative.to_string(), row.sparsity.to_string(), row.k_star.to_string()];
            rec.extend(row.powers.iter().map(|(_, v)| format!("{v:.4}")));
            rec.push(format!("{:.4}", row.ratio()));
            w.write_record(&rec)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .expect("csv output is utf-8");
        Ok(out + &body)
    }

    pub fn render_text(&self) -> String {
        let mut out = format!(
            "Σ{}  p={}  n1={}  n2={}  runs={}  projection={}  seed={}\n",
            self.config.sigma_id,
            self.config.p,
            self.config.n1,
            self.config.n2,
            self.config.runs,
            self.config.projection,
            self.config.seed
        );
        for row in &self.rows {
            let _ = write!(out, "Alt{} {:>4}%  k*={:<3}", row.alternative, fmt_percent(row.sparsity), row.k_star);
            for (k, v) in &row.powers {
                let _ = write!(out, "  k={k}:{v:.3}");
            }
            let _ = writeln!(out, "  ratio={:.4}", row.ratio());
        }
        out
    }
}

/// Power of the single-projection test at each `k` of the grid and at the
/// recommended `k`, on shared datasets.
pub fn k_ratio_experiment(cfg: &ExperimentConfig) -> Result<KRatioTable> {
    cfg.validate()?;
    if cfg.k_grid.is_empty() {
        return Err(Error::Config("k grid is empty".into()));
    }
    let sigma = make_sigma(cfg.sigma_id, cfg.p)?;
    let n = cfg.n1 + cfg.n2 - 2;
    let k_star = choose_k(cfg.n1, cfg.n2, cfg.alpha)?;
    let mut ks = cfg.k_grid.clone();
    ks.push(k_star);
    ks.sort_unstable();
    ks.dedup();
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k >= n || k > cfg.p) {
        return Err(Error::Config(format!(
            "k = {bad} is outside 1..min(n, p+1) = 1..{}",
            n.min(cfg.p + 1)
        )));
    }
    let root = StreamKey::new(cfg.seed).child("k-ratio", 0);
    let mut rows = Vec::new();
    let mut ri = 0u64;
    for &a in &cfg.alternatives {
        for &s in &cfg.sparsities {
            let row_key = root.child("row", ri);
            ri += 1;
            let fixed = if cfg.fixed_alternative {
                Some(make_alternative(a, s, &sigma, &row_key.child("alternative", 0))?)
            } else {
                None
            };
            let hits = (0..cfg.runs)
                .into_par_iter()
                .map(|r| {
                    let key = row_key.child("run", r as u64);
                    let drawn;
                    let alt = match &fixed {
                        Some(f) => f,
                        None => {
                            drawn = make_alternative(a, s, &sigma, &key.child("alternative", 0))?;
                            &drawn
                        }
                    };
                    let zero = DVector::zeros(cfg.p);
                    let x = sample_dataset(cfg.n1, &zero, &sigma, &key.child("x", 0))?;
                    let y = sample_dataset(cfg.n2, &alt.mu2, &sigma, &key.child("y", 0))?;
                    let stats = summarize(&x, &y)?;
                    ks.iter()
                        .map(|&k| {
                            let basis = SpanBasis::draw(cfg.projection, cfg.p, k, &key.child("projection", k as u64))?;
                            Ok(t2_projected(&project_stats(&stats, &basis)?)?.pvalue < cfg.alpha)
                        })
                        .collect::<Result<Vec<bool>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let powers = ks
                .iter()
                .enumerate()
                .map(|(j, &k)| {
                    let c = hits.iter().filter(|h| h[j]).count();
                    (k, c as f64 / cfg.runs as f64)
                })
                .collect();
            rows.push(KRatioRow {
                alternative: a,
                sparsity: s,
                k_star,
                powers,
            });
        }
    }
    Ok(KRatioTable {
        config: cfg.clone(),
        rows,
    })
}
