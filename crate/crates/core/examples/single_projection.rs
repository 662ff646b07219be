//! One projected Hotelling test and its exact power given the projection.

use nalgebra::DVector;
use raptt::covariance::make_sigma;
use raptt::hotelling::{critical_value, noncentrality, power_given_delta, t2_projected, PowerInputs};
use raptt::linstat::{project_stats, summarize};
use raptt::projections::haar_projection;
use raptt::randsrc::StreamKey;
use raptt::simharness::sample_dataset;

fn main() -> raptt::Result<()> {
    let (n1, n2, p, k) = (20, 20, 100, 15);
    let sigma = make_sigma(3, p)?;
    let mu = DVector::from_fn(p, |i, _| if i < 10 { 0.9 } else { 0.0 });
    let key = StreamKey::new(1);
    let x = sample_dataset(n1, &mu, &sigma, &key.child("x", 0))?;
    let y = sample_dataset(n2, &DVector::zeros(p), &sigma, &key.child("y", 0))?;
    let r = haar_projection(p, k, &key.child("r", 0))?;

    let res = t2_projected(&project_stats(&summarize(&x, &y)?, &r)?)?;
    let c = critical_value(k, n1 + n2 - 2, 0.05)?;
    println!("T2_R = {:.3}, p-value {:.4}, reject at 5%: {}", res.t2, res.pvalue, res.rejects(c));

    let delta_r = noncentrality(&mu, &sigma, &r)?;
    let power = power_given_delta(&PowerInputs { delta_r, k, n1, n2, alpha: 0.05 })?;
    println!("Δ_R = {delta_r:.4}, power given R = {power:.4}");
    Ok(())
}
