//! Picks the projected dimension that minimizes the critical-value ratio.
//!
//! cargo run --example choose_k -- 50 50

use raptt::hotelling::{choose_k, critical_value_curve};

fn main() -> raptt::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (n1, n2) = match args[..] {
        [a, b, ..] => (a, b),
        _ => (50, 50),
    };
    let k = choose_k(n1, n2, 0.05)?;
    println!("n1={n1} n2={n2}: k* = {k}");
    for (kk, ratio) in critical_value_curve(n1, n2, 0.05)?.into_iter().filter(|(kk, _)| kk % 10 == 0 || *kk == k) {
        println!("  k={kk:3}  ratio {ratio:.4}");
    }
    Ok(())
}
