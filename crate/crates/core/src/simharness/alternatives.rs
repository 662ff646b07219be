use nalgebra::DVector;

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::randsrc::{fill_gaussian, random_permutation_from, StreamKey};

/// Constraint tolerance checked after scaling.
const CONSTRAINT_TOL: f64 = 1e-10;

/// A mean vector for the second sample; the first sample has mean zero.
#[derive(Debug, Clone)]
pub struct AlternativeSpec {
    pub id: u8,
    pub sparsity: f64,
    pub mu2: DVector<f64>,
    pub key: StreamKey,
}

impl AlternativeSpec {
    /// `μ₁ - μ₂`.
    pub fn mean_difference(&self) -> DVector<f64> {
        -&self.mu2
    }

    pub fn nonzero(&self) -> usize {
        self.mu2.iter().filter(|v| **v != 0.0).count()
    }
}

/// Number of nonzero coordinates for a sparsity level.
pub fn support_size(sparsity: f64, p: usize) -> Result<usize> {
    let target = sparsity * p as f64;
    if !(sparsity > 0.0 && sparsity <= 1.0) || target < 1.0 - 1e-9 {
        return Err(Error::Config(format!(
            "sparsity {sparsity} leaves no nonzero coordinate in dimension {p}"
        )));
    }
    Ok((target - 1e-9).ceil() as usize)
}

/// The value the constraint of alternative `id` asks for, and its current value.
fn constraint(id: u8, v: &DVector<f64>, sigma: &CovarianceSpec) -> (f64, f64) {
    match id {
        1 => (1.0, 0.5 * sigma.inv_quadratic_form(v)),
        _ => (0.1, v.norm_squared() / sigma.trace_sq().sqrt()),
    }
}

/// Draws `μ₂`: a random support of size `⌈sparsity·p⌉` filled with `N(1,1)`
/// values, then scaled so that
/// * alternative 1: `(1/2) μ₂'Σ⁻¹μ₂ = 1`
/// * alternative 2: `‖μ₂‖² / √tr(Σ²) = 0.1`
pub fn make_alternative(
    id: u8,
    sparsity: f64,
    sigma: &CovarianceSpec,
    key: &StreamKey,
) -> Result<AlternativeSpec> {
    if id != 1 && id != 2 {
        return Err(Error::Config(format!("unknown alternative {id}")));
    }
    let p = sigma.p();
    let s = support_size(sparsity, p)?;
    for attempt in 0..64u64 {
        let mut rng = if attempt == 0 {
            key.stream()
        } else {
            key.child("redraw", attempt).stream()
        };
        let perm = random_permutation_from(&mut rng, p);
        let mut vals = vec![0.0; s];
        fill_gaussian(&mut rng, &mut vals);
        let mut v = DVector::zeros(p);
        for (&j, g) in perm[..s].iter().zip(vals) {
            v[j] = 1.0 + g;
        }
        let (target, current) = constraint(id, &v, sigma);
        if !(current > 0.0) {
            log::warn!("alternative draw {attempt} is all zero; redrawing");
            continue;
        }
        v *= (target / current).sqrt();
        let (_, check) = constraint(id, &v, sigma);
        if (check - target).abs() > CONSTRAINT_TOL * target.max(1.0) {
            return Err(Error::Degenerate(format!(
                "alternative {id} misses its constraint: {check} vs {target}"
            )));
        }
        return Ok(AlternativeSpec {
            id,
            sparsity,
            mu2: v,
            key: key.clone(),
        });
    }
    Err(Error::Degenerate("could not draw a nonzero alternative".into()))
}
