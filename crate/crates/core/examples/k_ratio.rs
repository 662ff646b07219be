//! Power of a single projection across projected dimensions, against k*.

use raptt::simharness::{k_ratio_experiment, ExperimentConfig};

fn main() -> raptt::Result<()> {
    let cfg = ExperimentConfig::parse(
        "experiment = k-ratio\nsigma_id = 3\np = 200\nn1 = 50\nn2 = 50\nruns = 200\n\
         alternatives = 1, 2\nsparsities = 0.05, 0.5\nk_grid = 5, 15, 30, 45, 70\nseed = 41\n",
    )?;
    println!("{}", k_ratio_experiment(&cfg)?.render_text());
    Ok(())
}
