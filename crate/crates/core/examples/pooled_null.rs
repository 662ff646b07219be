//! Null draws of the averaged p-value under several covariance structures,
//! pooled, with a homogeneity check.

use raptt::covariance::make_sigma;
use raptt::procedure::{KChoice, RapttConfig};
use raptt::projections::ProjectionKind;
use raptt::simharness::pooled_null_calibration;

fn main() -> raptt::Result<()> {
    let p = 100;
    let sigmas = (1..=4).map(|id| make_sigma(id, p)).collect::<raptt::Result<Vec<_>>>()?;
    let cfg = RapttConfig { m: 50, k: KChoice::Auto, kind: ProjectionKind::Haar, alpha: 0.05, seed: 51 };
    let (cal, homogeneity) = pooled_null_calibration(15, 15, &sigmas, &cfg, 500)?;
    println!("pooled K = {}, cutoff {:.4}, homogeneity p-value {homogeneity:.3e}", cal.big_k, cal.cutoff(0.05)?);
    Ok(())
}
