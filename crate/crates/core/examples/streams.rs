//! Keyed random streams: the same path always yields the same draws,
//! whatever the thread count.

use raptt::procedure::average_pvalue_keyed;
use raptt::linstat::summarize;
use raptt::projections::ProjectionKind;
use raptt::randsrc::{gaussian_matrix, StreamKey};
use raptt::linstat::DataMatrix;

fn main() -> raptt::Result<()> {
    let root = StreamKey::new(61);
    let a = gaussian_matrix(2, 3, &root.child("draw", 0));
    let b = gaussian_matrix(2, 3, &root.child("draw", 0));
    let c = gaussian_matrix(2, 3, &root.child("draw", 1));
    println!("same key equal: {}, sibling equal: {}", a == b, a == c);

    let x = DataMatrix::new(gaussian_matrix(10, 40, &root.child("x", 0)))?;
    let y = DataMatrix::new(gaussian_matrix(12, 40, &root.child("y", 0)))?;
    let st = summarize(&x, &y)?;
    let key = root.child("test", 0);
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        let theta = pool.install(|| average_pvalue_keyed(&st, 8, 100, ProjectionKind::Block, &key, true))?;
        println!("{threads} thread(s): θ̄* = {theta:.17}");
    }
    Ok(())
}
