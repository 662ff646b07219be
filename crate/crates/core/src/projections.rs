//! Random semi-orthogonal projections (`R'R = I_k`).
//!
//! Two families are provided:
//!
//! * **Haar**: uniform on the Stiefel manifold. Built as the thin QR factor of
//!   a `p x k` Gaussian matrix with column signs fixed so the triangular factor
//!   has a positive diagonal, which makes the factorization unique.
//! * **Block** ("one permutation + one random projection"): iid standard normal
//!   weights, a uniform permutation of the coordinates, `k` contiguous blocks of
//!   the permuted coordinates, one normalized weight vector per block.
//!
//! Hotelling forms only see a projection through its column span, so hot loops
//! use a [`SpanBasis`]: the unnormalized matrix drawn from the same stream as
//! the corresponding [`ProjectionMatrix`], skipping the QR and normalization.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::randsrc::{fill_gaussian, gaussian_matrix, random_permutation_from, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionKind {
    Haar,
    Block,
}

impl ProjectionKind {
    pub const ALL: [ProjectionKind; 2] = [ProjectionKind::Haar, ProjectionKind::Block];

    pub fn as_str(self) -> &'static str {
        match self {
            ProjectionKind::Haar => "haar",
            ProjectionKind::Block => "block",
        }
    }
}

impl fmt::Display for ProjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProjectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "haar" | "r1" => Ok(ProjectionKind::Haar),
            "block" | "r2" => Ok(ProjectionKind::Block),
            other => Err(Error::Config(format!("unknown projection kind `{other}`"))),
        }
    }
}

/// Anything that maps `p`-dimensional rows to `k` dimensions by right
/// multiplication.
pub trait Projector {
    fn p(&self) -> usize;
    fn k(&self) -> usize;
    /// `Z R` for a matrix whose rows are `p`-vectors.
    fn project_rows(&self, z: &DMatrix<f64>) -> DMatrix<f64>;
    /// `R' v`.
    fn project_vector(&self, v: &DVector<f64>) -> DVector<f64>;
}

/// A `p x k` matrix with orthonormal columns and its provenance.
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    values: DMatrix<f64>,
    kind: ProjectionKind,
    key: StreamKey,
}

impl ProjectionMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn key(&self) -> &StreamKey {
        &self.key
    }

    /// Largest entry of `|R'R - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.values.tr_mul(&self.values);
        let k = g.nrows();
        let mut worst = 0.0_f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// The identity embedding (`k = p`, `R = I`).
    pub fn identity(p: usize) -> Self {
        Self {
            values: DMatrix::identity(p, p),
            kind: ProjectionKind::Haar,
            key: StreamKey::new(0).child("identity", p as u64),
        }
    }

    /// Wraps a caller-supplied matrix after checking `R'R = I` to `1e-10`.
    pub fn from_matrix(values: DMatrix<f64>, kind: ProjectionKind, key: StreamKey) -> Result<Self> {
        let proj = Self { values, kind, key };
        let err = proj.orthonormality_error();
        if !(err <= 1e-10) {
            return Err(Error::Domain(format!(
                "matrix is not semi-orthogonal (max |R'R - I| = {err:e})"
            )));
        }
        Ok(proj)
    }
}

impl Projector for ProjectionMatrix {
    fn p(&self) -> usize {
        self.values.nrows()
    }

    fn k(&self) -> usize {
        self.values.ncols()
    }

    fn project_rows(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        z * &self.values
    }

    fn project_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        self.values.tr_mul(v)
    }
}

fn check_dims(p: usize, k: usize) -> Result<()> {
    if k == 0 || k > p {
        return Err(Error::Domain(format!(
            "projection needs 1 <= k <= p, got k = {k}, p = {p}"
        )));
    }
    Ok(())
}

pub fn projection(kind: ProjectionKind, p: usize, k: usize, key: &StreamKey) -> Result<ProjectionMatrix> {
    match kind {
        ProjectionKind::Haar => haar_projection(p, k, key),
        ProjectionKind::Block => block_projection(p, k, key),
    }
}

/// Haar-distributed `p x k` semi-orthogonal matrix.
pub fn haar_projection(p: usize, k: usize, key: &StreamKey) -> Result<ProjectionMatrix> {
    check_dims(p, k)?;
    let g = gaussian_matrix(p, k, key);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(ProjectionMatrix {
        values: q,
        kind: ProjectionKind::Haar,
        key: key.clone(),
    })
}

/// Sizes of the `k` contiguous blocks covering `p` coordinates: the first
/// `p mod k` blocks get `ceil(p/k)`, the rest `floor(p/k)`.
pub fn block_sizes(p: usize, k: usize) -> Vec<usize> {
    let (base, extra) = (p / k, p % k);
    (0..k).map(|b| base + usize::from(b < extra)).collect()
}

/// Raw block structure: coordinate `i` belongs to block `block_of[i]` with
/// weight `weight[i]` (not normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    pub block_of: Vec<usize>,
    pub weight: Vec<f64>,
    pub k: usize,
}

fn block_layout(p: usize, k: usize, key: &StreamKey) -> Result<BlockLayout> {
    check_dims(p, k)?;
    let mut rng = key.stream();
    let mut weight = vec![0.0; p];
    fill_gaussian(&mut rng, &mut weight);
    let perm = random_permutation_from(&mut rng, p);

    let mut block_of = vec![0; p];
    let mut members: Vec<Vec<usize>> = Vec::with_capacity(k);
    let mut t = 0;
    for (b, size) in block_sizes(p, k).into_iter().enumerate() {
        let coords: Vec<usize> = perm[t..t + size].to_vec();
        for &c in &coords {
            block_of[c] = b;
        }
        members.push(coords);
        t += size;
    }

    // A block whose weights are all zero would leave a zero column. It has
    // probability zero under normal weights; redraw if it ever happens.
    for (b, coords) in members.iter().enumerate() {
        let mut attempt = 0u64;
        while coords.iter().all(|&c| weight[c] == 0.0) {
            log::warn!("block {b} drew an all-zero weight vector; redrawing");
            let mut retry = key.child("reweight", b as u64 * 1_000 + attempt).stream();
            for &c in coords {
                weight[c] = retry.sample(rand_distr::StandardNormal);
            }
            attempt += 1;
        }
    }
    Ok(BlockLayout { block_of, weight, k })
}

/// "One permutation + one random projection" matrix.
pub fn block_projection(p: usize, k: usize, key: &StreamKey) -> Result<ProjectionMatrix> {
    let layout = block_layout(p, k, key)?;
    let mut norms = vec![0.0_f64; k];
    for (i, &w) in layout.weight.iter().enumerate() {
        norms[layout.block_of[i]] += w * w;
    }
    for v in &mut norms {
        *v = v.sqrt();
    }
    let mut values = DMatrix::zeros(p, k);
    for (i, &w) in layout.weight.iter().enumerate() {
        let b = layout.block_of[i];
        values[(i, b)] = w / norms[b];
    }
    Ok(ProjectionMatrix {
        values,
        kind: ProjectionKind::Block,
        key: key.clone(),
    })
}

/// A matrix with the same column span as the projection drawn from the same
/// key, cheaper to build and apply.
#[derive(Debug, Clone)]
pub enum SpanBasis {
    Dense(DMatrix<f64>),
    Block(BlockLayout),
}

impl SpanBasis {
    pub fn draw(kind: ProjectionKind, p: usize, k: usize, key: &StreamKey) -> Result<Self> {
        match kind {
            ProjectionKind::Haar => {
                check_dims(p, k)?;
                Ok(SpanBasis::Dense(gaussian_matrix(p, k, key)))
            }
            ProjectionKind::Block => Ok(SpanBasis::Block(block_layout(p, k, key)?)),
        }
    }
}

impl Projector for SpanBasis {
    fn p(&self) -> usize {
        match self {
            SpanBasis::Dense(g) => g.nrows(),
            SpanBasis::Block(b) => b.block_of.len(),
        }
    }

    fn k(&self) -> usize {
        match self {
            SpanBasis::Dense(g) => g.ncols(),
            SpanBasis::Block(b) => b.k,
        }
    }

    fn project_rows(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            SpanBasis::Dense(g) => z * g,
            SpanBasis::Block(b) => {
                let mut out = DMatrix::zeros(z.nrows(), b.k);
                for (i, (&blk, &w)) in b.block_of.iter().zip(&b.weight).enumerate() {
                    out.column_mut(blk).axpy(w, &z.column(i), 1.0);
                }
                out
            }
        }
    }

    fn project_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            SpanBasis::Dense(g) => g.tr_mul(v),
            SpanBasis::Block(b) => {
                let mut out = DVector::zeros(b.k);
                for (i, (&blk, &w)) in b.block_of.iter().zip(&b.weight).enumerate() {
                    out[blk] += w * v[i];
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_sizes_spread_remainder() {
        assert_eq!(block_sizes(10, 3), vec![4, 3, 3]);
        assert_eq!(block_sizes(4, 2), vec![2, 2]);
        assert_eq!(block_sizes(7, 7), vec![1; 7]);
        assert_eq!(block_sizes(200, 43).iter().sum::<usize>(), 200);
    }

    #[test]
    fn block_structure_p4_k2() {
        let r = block_projection(4, 2, &StreamKey::new(3)).unwrap();
        let v = r.values();
        for i in 0..4 {
            let nz = (0..2).filter(|&j| v[(i, j)] != 0.0).count();
            assert_eq!(nz, 1, "row {i}");
        }
        for j in 0..2 {
            let nz = (0..4).filter(|&i| v[(i, j)] != 0.0).count();
            assert_eq!(nz, 2);
            assert!((v.column(j).norm() - 1.0).abs() < 1e-15);
        }
        assert!(r.orthonormality_error() < 1e-15);
    }

    #[test]
    fn rejects_k_above_p() {
        assert!(haar_projection(3, 4, &StreamKey::new(0)).is_err());
        assert!(block_projection(3, 0, &StreamKey::new(0)).is_err());
        assert!(SpanBasis::draw(ProjectionKind::Haar, 2, 3, &StreamKey::new(0)).is_err());
    }

    #[test]
    fn haar_has_positive_r_diagonal_convention() {
        let key = StreamKey::new(9);
        let r = haar_projection(6, 3, &key).unwrap();
        let g = gaussian_matrix(6, 3, &key);
        // G = Q T with T upper triangular and positive diagonal.
        let t = r.values().tr_mul(&g);
        for j in 0..3 {
            assert!(t[(j, j)] > 0.0);
            for i in j + 1..3 {
                assert!(t[(i, j)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn span_basis_matches_projection_action() {
        let key = StreamKey::new(21);
        let z = gaussian_matrix(5, 9, &StreamKey::new(1));
        for kind in ProjectionKind::ALL {
            let r = projection(kind, 9, 4, &key).unwrap();
            let s = SpanBasis::draw(kind, 9, 4, &key).unwrap();
            let a = r.project_rows(&z);
            let b = s.project_rows(&z);
            // Same span: a = b * T for some invertible T; check that the
            // residual of projecting `a` onto span(b) vanishes.
            let qb = b.clone().qr().q();
            let resid = &a - &qb * qb.tr_mul(&a);
            assert!(resid.norm() < 1e-10, "{kind}: {}", resid.norm());
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("HAAR".parse::<ProjectionKind>().unwrap(), ProjectionKind::Haar);
        assert_eq!("block".parse::<ProjectionKind>().unwrap(), ProjectionKind::Block);
        assert!("sparse".parse::<ProjectionKind>().is_err());
    }
}
