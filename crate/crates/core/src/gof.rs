//! Goodness-of-fit and binomial helpers for checking simulation output.

use crate::error::{Error, Result};
use crate::specfun::beta_quantile;

/// Kolmogorov distribution tail `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    // The alternating series is inaccurate near zero, where the tail is 1 to
    // double precision anyway.
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += if j as u64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS statistic and asymptotic p-value (with Stephens' small-sample correction).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub pvalue: f64,
}

fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample KS test of `sample` against a continuous `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(Error::Domain("KS test needs a nonempty sample".into()));
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        pvalue: ks_pvalue(d, n),
    })
}

/// One-sample KS test against Uniform(0, 1).
pub fn ks_uniform(sample: &[f64]) -> Result<KsResult> {
    ks_one_sample(sample, |x| x.clamp(0.0, 1.0))
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("KS test needs nonempty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult {
        statistic: d,
        pvalue: ks_pvalue(d, na * nb / (na + nb)),
    })
}

/// Homogeneity of several samples: smallest pairwise two-sample KS p-value
/// multiplied by the number of pairs (Bonferroni), capped at 1.
pub fn ks_homogeneity(samples: &[&[f64]]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Domain("homogeneity check needs at least two samples".into()));
    }
    let mut min_p: f64 = 1.0;
    let mut pairs = 0;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            min_p = min_p.min(ks_two_sample(samples[i], samples[j])?.pvalue);
            pairs += 1;
        }
    }
    Ok((min_p * pairs as f64).min(1.0))
}

/// Exact (Clopper–Pearson) two-sided binomial confidence interval.
pub fn clopper_pearson(successes: usize, trials: usize, level: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::Domain(format!(
            "need 0 <= successes <= trials and trials > 0, got {successes}/{trials}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0,1), got {level}")));
    }
    let tail = 0.5 * (1.0 - level);
    let (x, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 { 0.0 } else { beta_quantile(tail, x, n - x + 1.0)? };
    let hi = if successes == trials { 1.0 } else { beta_quantile(1.0 - tail, x + 1.0, n - x)? };
    Ok((lo, hi))
}

/// Monte Carlo standard error of a proportion.
pub fn binomial_se(rate: f64, trials: usize) -> f64 {
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_points() {
        // P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_uniform_grid() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let r = ks_uniform(&v).unwrap();
        assert!((r.statistic - 0.0005).abs() < 1e-12);
        assert!(r.pvalue > 0.99);
        let skew: Vec<f64> = v.iter().map(|x| x * x).collect();
        assert!(ks_uniform(&skew).unwrap().pvalue < 1e-6);
    }

    #[test]
    fn two_sample_identical_and_shifted() {
        let a: Vec<f64> = (0..500).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 250.0).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert!((r.statistic - 0.5).abs() < 1e-12);
        assert!(r.pvalue < 1e-20);
    }

    #[test]
    fn clopper_pearson_edges() {
        let (lo, hi) = clopper_pearson(0, 10, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        // Upper bound for 0/10 is 1 - 0.025^(1/10).
        assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-10);
        let (lo, hi) = clopper_pearson(50, 100, 0.95).unwrap();
        assert!(lo < 0.5 && hi > 0.5 && (0.5 - lo - (hi - 0.5)).abs() < 1e-10);
        assert!(clopper_pearson(3, 2, 0.95).is_err());
    }
}
