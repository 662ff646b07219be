//! Simulates the null law of the averaged p-value, saves it, and tests a
//! shifted sample against it.

use nalgebra::DVector;
use raptt::covariance::make_sigma;
use raptt::procedure::{calibrate_null, raptt_test, KChoice, NullCalibration, RapttConfig};
use raptt::projections::ProjectionKind;
use raptt::randsrc::StreamKey;
use raptt::simharness::sample_dataset;

fn main() -> raptt::Result<()> {
    let (n1, n2, p) = (25, 25, 150);
    let cfg = RapttConfig { m: 200, k: KChoice::Auto, kind: ProjectionKind::Haar, alpha: 0.05, seed: 11 };

    let cal = calibrate_null(n1, n2, p, &cfg, 1000)?;
    let path = std::env::temp_dir().join("raptt-example-calibration.json");
    cal.save(&path)?;
    let cal = NullCalibration::load(&path)?;
    println!("cutoff u = {:.4} from K = {} draws ({})", cal.cutoff(0.05)?, cal.big_k, path.display());

    let sigma = make_sigma(1, p)?;
    let key = StreamKey::new(12);
    for (label, shift) in [("null", 0.0), ("shifted", 0.35)] {
        let mu = DVector::from_element(p, shift);
        let x = sample_dataset(n1, &mu, &sigma, &key.child(label, 0))?;
        let y = sample_dataset(n2, &DVector::zeros(p), &sigma, &key.child(label, 1))?;
        println!("{label}: {}", raptt_test(&x, &y, &cfg, &cal)?.to_json_line());
    }
    Ok(())
}
