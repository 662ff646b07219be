//! Classical and random-projection Hotelling statistics, exact p-values,
//! the projected-dimension rule and the exact single-projection power.
//!
//! Every quadratic form goes through a Cholesky solve; no inverse is formed.

use nalgebra::{DMatrix, DVector};

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::linstat::{ProjectedStats, SufficientStats};
use crate::projections::ProjectionMatrix;
use crate::specfun::{f_cdf, f_isf, f_sf, noncentral_f_cdf, poisson_mixture, reg_inc_beta};

/// One random-projection Hotelling test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleProjectionResult {
    /// `T²_R`.
    pub t2: f64,
    /// `((n-k+1)/k) T²_R / n`, F-distributed with `(k, n-k+1)` df under the null.
    pub scaled: f64,
    pub pvalue: f64,
    pub k: usize,
    pub n: usize,
}

impl SingleProjectionResult {
    pub fn rejects(&self, critical: f64) -> bool {
        self.scaled > critical
    }
}

fn cholesky_form(m: &DMatrix<f64>, v: &DVector<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let mut y = v.clone();
    chol.l_dirty().solve_lower_triangular_mut(&mut y);
    Some(y.norm_squared())
}

/// `(n1 n2 / (n1 + n2)) (X̄-Ȳ)' S⁻¹ (X̄-Ȳ)`. Only defined for `p < n`.
pub fn t2_classical(stats: &SufficientStats) -> Result<f64> {
    let (p, n) = (stats.p(), stats.n());
    if p >= n {
        return Err(Error::SingularCovariance(format!(
            "pooled covariance is singular when p >= n (p = {p}, n = {n})"
        )));
    }
    let s = stats.pooled_covariance();
    let form = cholesky_form(&s, stats.diff()).ok_or_else(|| {
        Error::SingularCovariance("pooled covariance is not positive definite".into())
    })?;
    Ok(stats.harmonic_scale() * form)
}

/// Hotelling test on projected statistics.
pub fn t2_projected(proj: &ProjectedStats) -> Result<SingleProjectionResult> {
    let (k, n) = (proj.k, proj.n);
    if k == 0 || k >= n {
        return Err(Error::Domain(format!(
            "projected dimension must satisfy 1 <= k < n = {n}, got {k}"
        )));
    }
    let form = cholesky_form(&proj.s_proj, &proj.diff).ok_or_else(|| {
        Error::Degenerate(
            "projected covariance is not positive definite (duplicated or constant rows?)".into(),
        )
    })?;
    let (a, b) = (proj.n1 as f64, proj.n2 as f64);
    let t2 = a * b / (a + b) * form;
    let df2 = (n - k + 1) as f64;
    let scaled = df2 / k as f64 * t2 / n as f64;
    let pvalue = f_sf(scaled, k as f64, df2)?;
    Ok(SingleProjectionResult {
        t2,
        scaled,
        pvalue,
        k,
        n,
    })
}

/// `c_α` with `F_{k, n-k+1}(c_α) = 1 - α`.
pub fn critical_value(k: usize, n: usize, alpha: f64) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!(
            "degrees of freedom (k, n-k+1) must be positive, got k = {k}, n = {n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    f_isf(alpha, k as f64, (n - k + 1) as f64)
}

/// `(k, c_α(k))` for every admissible `k` in `1..n`.
pub fn critical_value_curve(n1: usize, n2: usize, alpha: f64) -> Result<Vec<(usize, f64)>> {
    let n = (n1 + n2).checked_sub(2).filter(|&n| n >= 2).ok_or_else(|| {
        Error::InsufficientSamples(format!("need n1 + n2 - 2 >= 2, got n1 = {n1}, n2 = {n2}"))
    })?;
    (1..n)
        .map(|k| critical_value(k, n, alpha).map(|c| (k, c)))
        .collect()
}

/// The projected dimension minimizing `c_α` over `1 <= k < n`; ties go to the
/// smaller `k`. Never depends on the data dimension.
pub fn choose_k(n1: usize, n2: usize, alpha: f64) -> Result<usize> {
    let curve = critical_value_curve(n1, n2, alpha)?;
    let mut best = curve[0];
    for &(k, c) in &curve[1..] {
        if c < best.1 {
            best = (k, c);
        }
    }
    Ok(best.0)
}

/// `Δ_R = (μ₁-μ₂)' R (R'ΣR)⁻¹ R' (μ₁-μ₂)`.
pub fn noncentrality(
    mu_diff: &DVector<f64>,
    sigma: &CovarianceSpec,
    r: &ProjectionMatrix,
) -> Result<f64> {
    let rv = r.values();
    if mu_diff.len() != rv.nrows() || sigma.p() != rv.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "mean difference has length {}, Σ has dimension {}, R has {} rows",
            mu_diff.len(),
            sigma.p(),
            rv.nrows()
        )));
    }
    let inner = rv.tr_mul(&sigma.mul_mat(rv));
    let proj = rv.tr_mul(mu_diff);
    cholesky_form(&inner, &proj)
        .ok_or_else(|| Error::Domain("R'ΣR is not positive definite".into()))
}

/// Inputs of the exact single-projection power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerInputs {
    pub delta_r: f64,
    pub k: usize,
    pub n1: usize,
    pub n2: usize,
    pub alpha: f64,
}

/// How [`power_given_delta_via`] evaluates the power series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerRoute {
    /// `1 - F_{k, n-k+1, δ}(c_α)` through the noncentral F mixture of
    /// central F distribution functions.
    #[default]
    NoncentralF,
    /// Poisson mixture of incomplete beta terms
    /// `I_{k c_α / (k c_α + n - k + 1)}(k/2 + l, (n-k+1)/2)`.
    PoissonBeta,
}

impl PowerInputs {
    fn validate(&self) -> Result<usize> {
        if !(self.delta_r >= 0.0) || !self.delta_r.is_finite() {
            return Err(Error::Domain(format!(
                "Δ_R must be finite and >= 0, got {}",
                self.delta_r
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        let n = (self.n1 + self.n2).saturating_sub(2);
        if self.k == 0 || self.k > n {
            return Err(Error::Domain(format!(
                "need 1 <= k <= n (= {n}) for positive degrees of freedom, got k = {}",
                self.k
            )));
        }
        Ok(n)
    }

    /// F noncentrality `(1/n1 + 1/n2)⁻¹ Δ_R`.
    pub fn f_noncentrality(&self) -> f64 {
        let (a, b) = (self.n1 as f64, self.n2 as f64);
        a * b / (a + b) * self.delta_r
    }
}

/// Exact power of the single-projection test at level `alpha` given `Δ_R`.
pub fn power_given_delta(inputs: &PowerInputs) -> Result<f64> {
    power_given_delta_via(inputs, PowerRoute::NoncentralF)
}

pub fn power_given_delta_via(inputs: &PowerInputs, route: PowerRoute) -> Result<f64> {
    let n = inputs.validate()?;
    let k = inputs.k as f64;
    let df2 = (n - inputs.k + 1) as f64;
    let c = critical_value(inputs.k, n, inputs.alpha)?;
    let delta = inputs.f_noncentrality();
    if delta == 0.0 {
        // Same expression as the null p-value so size is reproduced exactly.
        return f_sf(c, k, df2);
    }
    let cdf = match route {
        PowerRoute::NoncentralF => noncentral_f_cdf(c, k, df2, delta)?,
        PowerRoute::PoissonBeta => {
            let x = k * c / (k * c + df2);
            poisson_mixture(0.5 * delta, |l| reg_inc_beta(x, 0.5 * k + l as f64, 0.5 * df2))?
        }
    };
    Ok((1.0 - cdf).clamp(0.0, 1.0))
}

/// `F_{k, n-k+1}` evaluated at a scaled statistic.
pub fn null_cdf(scaled: f64, k: usize, n: usize) -> Result<f64> {
    f_cdf(scaled, k as f64, (n - k + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linstat::{project_stats, summarize, DataMatrix};

    fn col(v: &[f64]) -> DataMatrix {
        DataMatrix::from_rows(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn t2_hand_example() {
        let s = summarize(&col(&[1.0, 2.0, 3.0]), &col(&[2.0, 4.0])).unwrap();
        let t2 = t2_classical(&s).unwrap();
        assert!((t2 - 0.9).abs() < 1e-14, "{t2}");
    }

    #[test]
    fn t2_zero_when_means_equal() {
        let x = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let y = DataMatrix::from_rows(&[vec![2.0, 1.0], vec![-2.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let s = summarize(&x, &y).unwrap();
        assert_eq!(t2_classical(&s).unwrap(), 0.0);
    }

    #[test]
    fn t2_undefined_in_high_dimension() {
        let x = DataMatrix::from_rows(&[vec![1.0, 0.0, 3.0], vec![-1.0, 2.0, 0.0]]).unwrap();
        let y = DataMatrix::from_rows(&[vec![2.0, 1.0, 1.0], vec![-2.0, 1.0, 5.0]]).unwrap();
        let s = summarize(&x, &y).unwrap();
        assert!(matches!(t2_classical(&s), Err(Error::SingularCovariance(_))));
    }

    #[test]
    fn projected_rejects_k_at_least_n() {
        let s = summarize(&col(&[1.0, 2.0, 3.0]), &col(&[2.0, 4.0])).unwrap();
        let mut proj = project_stats(&s, &ProjectionMatrix::identity(1)).unwrap();
        proj.k = 3;
        assert!(t2_projected(&proj).is_err());
    }

    #[test]
    fn degenerate_projected_covariance() {
        let s = summarize(
            &DataMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(),
            &DataMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let proj = project_stats(&s, &ProjectionMatrix::identity(2)).unwrap();
        assert!(matches!(t2_projected(&proj), Err(Error::Degenerate(_))));
    }

    #[test]
    fn choose_k_matches_brute_force_small() {
        let n = 4;
        let best = (1..n)
            .map(|k| (k, critical_value(k, n, 0.05).unwrap()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        assert_eq!(choose_k(3, 3, 0.05).unwrap(), best.0);
        assert!(choose_k(1, 1, 0.05).is_err());
        assert!(choose_k(1, 2, 0.05).is_err());
    }

    #[test]
    fn choose_k_reference_values() {
        for &(n1, n2, k) in &[(50, 50, 43), (70, 70, 62), (40, 22, 25), (25, 25, 20), (3, 3, 1)] {
            assert_eq!(choose_k(n1, n2, 0.05).unwrap(), k, "({n1}, {n2})");
        }
        let c = critical_value(43, 98, 0.05).unwrap();
        assert!((c - 1.5964052219669582).abs() < 1e-12, "{c}");
    }

    #[test]
    fn critical_value_limits() {
        assert!(critical_value(3, 10, 1.0 - 1e-9).unwrap() < 1e-3);
        assert!(critical_value(0, 10, 0.05).is_err());
        assert!(critical_value(11, 10, 0.05).is_err());
        assert!(critical_value(2, 10, 0.0).is_err());
    }

    #[test]
    fn power_at_zero_is_alpha() {
        for &(k, n1, n2) in &[(5, 20, 20), (43, 50, 50), (1, 3, 3)] {
            let inputs = PowerInputs { delta_r: 0.0, k, n1, n2, alpha: 0.05 };
            for route in [PowerRoute::NoncentralF, PowerRoute::PoissonBeta] {
                let p = power_given_delta_via(&inputs, route).unwrap();
                assert!((p - 0.05).abs() < 1e-12, "{p}");
            }
        }
        let bad = PowerInputs { delta_r: -1.0, k: 2, n1: 5, n2: 5, alpha: 0.05 };
        assert!(power_given_delta(&bad).is_err());
    }
}
