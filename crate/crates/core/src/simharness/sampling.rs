use nalgebra::DVector;
use rayon::prelude::*;

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::linstat::{summarize, DataMatrix};
use crate::procedure::{average_pvalue_keyed, NullCalibration, CalibrationKey, RapttConfig};
use crate::randsrc::{gaussian_matrix, StreamKey};

/// `n` rows distributed as `N_p(μ, Σ)`, drawn as `μ + L g`.
pub fn sample_dataset(
    n: usize,
    mu: &DVector<f64>,
    sigma: &CovarianceSpec,
    key: &StreamKey,
) -> Result<DataMatrix> {
    let p = sigma.p();
    if mu.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "mean has length {}, Σ has dimension {p}",
            mu.len()
        )));
    }
    let g = gaussian_matrix(p, n, key);
    let mut xt = sigma.chol_mul_mat(&g);
    for mut col in xt.column_iter_mut() {
        col += mu;
    }
    DataMatrix::new(xt.transpose())
}

/// Null draws of `θ̄*` from full datasets with common mean `mu` and
/// covariance `sigma`.
pub fn null_draws_under(
    n1: usize,
    n2: usize,
    sigma: &CovarianceSpec,
    mu: Option<&DVector<f64>>,
    config: &RapttConfig,
    big_k: usize,
    key: &StreamKey,
) -> Result<Vec<f64>> {
    config.validate()?;
    let k = config.resolve_k(n1, n2)?;
    let zero = DVector::zeros(sigma.p());
    let mu = mu.unwrap_or(&zero);
    (0..big_k)
        .into_par_iter()
        .map(|r| {
            let rk = key.child("replicate", r as u64);
            let x = sample_dataset(n1, mu, sigma, &rk.child("x", 0))?;
            let y = sample_dataset(n2, mu, sigma, &rk.child("y", 0))?;
            let stats = summarize(&x, &y)?;
            average_pvalue_keyed(&stats, k, config.m, config.kind, &rk.child("projections", 0), false)
        })
        .collect()
}

/// Pooled null distribution over several covariance structures, as a
/// calibration with `K = big_k_each · sigmas.len()`. Also returns the
/// homogeneity p-value of the per-structure samples.
pub fn pooled_null_calibration(
    n1: usize,
    n2: usize,
    sigmas: &[CovarianceSpec],
    config: &RapttConfig,
    big_k_each: usize,
) -> Result<(NullCalibration, f64)> {
    let p = sigmas
        .first()
        .ok_or_else(|| Error::Config("no covariance structures to pool".into()))?
        .p();
    if sigmas.iter().any(|s| s.p() != p) {
        return Err(Error::DimensionMismatch("pooled structures differ in dimension".into()));
    }
    let root = crate::randsrc::StreamKey::new(config.seed).child("pooled", 0);
    let samples = sigmas
        .iter()
        .map(|s| null_draws_under(n1, n2, s, None, config, big_k_each, &root.child("sigma", s.id() as u64)))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
    let homogeneity = if refs.len() > 1 { crate::gof::ks_homogeneity(&refs)? } else { 1.0 };
    let key = CalibrationKey {
        n1,
        n2,
        k: config.resolve_k(n1, n2)?,
        m: config.m,
        kind: config.kind,
        p,
    };
    let cal = NullCalibration::from_draws(key, config.seed, samples.concat())?;
    Ok((cal, homogeneity))
}
