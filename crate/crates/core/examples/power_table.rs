//! A small size/power table, printed as text and CSV.

use raptt::simharness::{run_power_experiment, ExperimentConfig};

const CONFIG: &str = "
sigma_id = 4
p = 100
n1 = 20
n2 = 20
runs = 100
m = 100
K = 500
alternatives = 1, 2
sparsities = 0.05, 0.5
methods = raptt-haar, raptt-block, bs, cq, sd
null = true
seed = 31
";

fn main() -> raptt::Result<()> {
    let cfg = ExperimentConfig::parse(CONFIG)?;
    let table = run_power_experiment(&cfg)?;
    println!("{}", table.render_text());
    print!("{}", table.to_csv()?);
    Ok(())
}
