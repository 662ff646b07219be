//! Reads a labelled CSV, splits it into two samples and runs the competitors.

use std::io::Write;

use raptt::cli::ingest::{ingest_csv, IngestOptions, LabelColumn};
use raptt::competitors::bs_test;
use raptt::linstat::summarize;

fn main() -> raptt::Result<()> {
    let path = std::env::temp_dir().join("raptt-example.csv");
    let mut f = std::fs::File::create(&path)?;
    writeln!(f, "group,g1,g2,g3,g4")?;
    for i in 0..8 {
        let shift = if i % 2 == 0 { 1.0 } else { 0.0 };
        let v = i as f64 * 0.1;
        writeln!(f, "{},{},{},{},{}", if shift > 0.0 { "a" } else { "b" }, v + shift, 1.0 - v, v * v, shift - v)?;
    }
    drop(f);

    let opts = IngestOptions {
        has_header: true,
        label_column: Some(LabelColumn::Name("group".into())),
        ..Default::default()
    };
    let (x, y) = ingest_csv(&path, &opts)?;
    println!("{} and {} samples, {} variables", x.n(), y.n(), x.p());
    println!("{}", bs_test(&summarize(&x, &y)?)?.to_report("bs", 0.05)?.to_json_line());
    Ok(())
}
