//! Sample containers and sufficient statistics.
//!
//! The pooled covariance `S = (S_X + S_Y) / n`, `n = n1 + n2 - 2`, is never
//! stored. Instead [`SufficientStats`] keeps a factor `Z` with `S = Z'Z / n`:
//! the group-mean-centered rows for observed data, or any `r x p` matrix with
//! the right Wishart law for simulated nulls. With `p` in the thousands and
//! `n` around sixty, every downstream quantity goes through `n`-sized Gram
//! objects.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::projections::Projector;

/// `n x p` sample matrix, one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::InsufficientSamples(format!(
                "a group needs at least 2 observations, got {}",
                values.nrows()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::Input("data matrix has no columns".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::Input(format!("non-finite entry at row {r}, column {c}")));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Input(format!(
                "row {bad} has {} values, expected {p}",
                rows[bad].len()
            )));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_means(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_iterator(self.p(), self.values.column_iter().map(|c| c.sum() / n))
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(self.values.select_rows(rows))
    }
}

/// Means and a covariance factor for a two-sample problem.
#[derive(Debug, Clone)]
pub struct SufficientStats {
    mean_x: DVector<f64>,
    mean_y: DVector<f64>,
    diff: DVector<f64>,
    centered: DMatrix<f64>,
    n1: usize,
    n2: usize,
}

impl SufficientStats {
    /// Builds statistics from means and any factor `Z` with `S = Z'Z / n`.
    pub fn from_factor(
        mean_x: DVector<f64>,
        mean_y: DVector<f64>,
        factor: DMatrix<f64>,
        n1: usize,
        n2: usize,
    ) -> Result<Self> {
        if n1 < 2 || n2 < 2 {
            return Err(Error::InsufficientSamples(format!(
                "need n1, n2 >= 2, got ({n1}, {n2})"
            )));
        }
        let p = mean_x.len();
        if mean_y.len() != p || factor.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "means have lengths {} and {}, factor has {} columns",
                p,
                mean_y.len(),
                factor.ncols()
            )));
        }
        let diff = &mean_x - &mean_y;
        Ok(Self {
            mean_x,
            mean_y,
            diff,
            centered: factor,
            n1,
            n2,
        })
    }

    pub fn mean_x(&self) -> &DVector<f64> {
        &self.mean_x
    }

    pub fn mean_y(&self) -> &DVector<f64> {
        &self.mean_y
    }

    /// `X̄ - Ȳ`.
    pub fn diff(&self) -> &DVector<f64> {
        &self.diff
    }

    /// The covariance factor `Z` (`S = Z'Z / n`).
    pub fn centered(&self) -> &DMatrix<f64> {
        &self.centered
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Pooled degrees of freedom `n1 + n2 - 2`.
    pub fn n(&self) -> usize {
        self.n1 + self.n2 - 2
    }

    pub fn p(&self) -> usize {
        self.diff.len()
    }

    /// `n1 n2 / (n1 + n2)`, the factor in front of every Hotelling form.
    pub fn harmonic_scale(&self) -> f64 {
        let (a, b) = (self.n1 as f64, self.n2 as f64);
        a * b / (a + b)
    }

    /// Dense `p x p` pooled covariance. Only for small `p`.
    pub fn pooled_covariance(&self) -> DMatrix<f64> {
        self.centered.tr_mul(&self.centered) / self.n() as f64
    }
}

/// Means and centered rows of the two samples.
pub fn summarize(x: &DataMatrix, y: &DataMatrix) -> Result<SufficientStats> {
    if x.p() != y.p() {
        return Err(Error::DimensionMismatch(format!(
            "samples have {} and {} columns",
            x.p(),
            y.p()
        )));
    }
    let (n1, n2, p) = (x.n(), y.n(), x.p());
    let mean_x = x.column_means();
    let mean_y = y.column_means();
    let mut centered = DMatrix::zeros(n1 + n2, p);
    for j in 0..p {
        let (mx, my) = (mean_x[j], mean_y[j]);
        let xc = x.values().column(j);
        let yc = y.values().column(j);
        let mut col = centered.column_mut(j);
        for i in 0..n1 {
            col[i] = xc[i] - mx;
        }
        for i in 0..n2 {
            col[n1 + i] = yc[i] - my;
        }
    }
    SufficientStats::from_factor(mean_x, mean_y, centered, n1, n2)
}

/// `tr(S)`, `tr(S²)` and `diag(S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStats {
    pub tr_s: f64,
    pub tr_s2: f64,
    pub diag_s: DVector<f64>,
}

pub fn trace_stats(stats: &SufficientStats) -> TraceStats {
    let z = stats.centered();
    let n = stats.n() as f64;
    let diag_s = DVector::from_iterator(
        z.ncols(),
        z.column_iter().map(|c| c.norm_squared() / n),
    );
    let tr_s = diag_s.sum();
    // tr(S²) = ||Z'Z||_F² / n² = ||ZZ'||_F² / n²; use the smaller square.
    let tr_s2 = if z.ncols() > z.nrows() {
        (z * z.transpose()).norm_squared() / (n * n)
    } else {
        z.tr_mul(z).norm_squared() / (n * n)
    };
    TraceStats { tr_s, tr_s2, diag_s }
}

/// Statistics of the projected samples `XR`, `YR`.
#[derive(Debug, Clone)]
pub struct ProjectedStats {
    /// `R'(X̄ - Ȳ)`.
    pub diff: DVector<f64>,
    /// `R'SR`.
    pub s_proj: DMatrix<f64>,
    pub n1: usize,
    pub n2: usize,
    pub n: usize,
    pub k: usize,
}

/// Projects the statistics onto the column space of `proj`.
pub fn project_stats<P: Projector + ?Sized>(
    stats: &SufficientStats,
    proj: &P,
) -> Result<ProjectedStats> {
    if proj.p() != stats.p() {
        return Err(Error::DimensionMismatch(format!(
            "projection has {} rows, data has dimension {}",
            proj.p(),
            stats.p()
        )));
    }
    let k = proj.k();
    let n = stats.n();
    if k == 0 || k >= n {
        return Err(Error::Domain(format!(
            "projected dimension must satisfy 1 <= k < n = {n}, got {k}"
        )));
    }
    let zr = proj.project_rows(stats.centered());
    let mut s_proj = zr.tr_mul(&zr) / n as f64;
    // Force exact symmetry.
    for i in 0..k {
        for j in 0..i {
            let v = 0.5 * (s_proj[(i, j)] + s_proj[(j, i)]);
            s_proj[(i, j)] = v;
            s_proj[(j, i)] = v;
        }
    }
    Ok(ProjectedStats {
        diff: proj.project_vector(stats.diff()),
        s_proj,
        n1: stats.n1(),
        n2: stats.n2(),
        n,
        k,
    })
}
