//! The three asymptotic high-dimensional tests on one dataset.

use nalgebra::DVector;
use raptt::competitors::{bs_test, cq_test, sd_test};
use raptt::covariance::make_sigma;
use raptt::linstat::summarize;
use raptt::randsrc::StreamKey;
use raptt::simharness::{make_alternative, sample_dataset};

fn main() -> raptt::Result<()> {
    let (n1, n2, p) = (40, 40, 300);
    let sigma = make_sigma(2, p)?;
    let key = StreamKey::new(21);
    let alt = make_alternative(2, 0.1, &sigma, &key.child("alt", 0))?;
    let x = sample_dataset(n1, &DVector::zeros(p), &sigma, &key.child("x", 0))?;
    let y = sample_dataset(n2, &alt.mu2, &sigma, &key.child("y", 0))?;
    let st = summarize(&x, &y)?;
    for (name, res) in [("bs", bs_test(&st)?), ("sd", sd_test(&st)?), ("cq", cq_test(&x, &y)?)] {
        println!("{}", res.to_report(name, 0.05)?.to_json_line());
    }
    Ok(())
}
