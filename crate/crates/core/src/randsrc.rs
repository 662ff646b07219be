//! Seeded, splittable randomness.
//!
//! A [`StreamKey`] is a master seed plus a path of `(label, index)` pairs. The
//! path is folded into a 256-bit ChaCha key with SHA-256, so the stream for a
//! key is a pure function of `(seed, path)`: any task can open its own stream
//! without coordination, and results never depend on scheduling or the number
//! of worker threads.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

/// Generator behind every stream.
pub type Stream = ChaCha8Rng;

#[derive(Clone, PartialEq, Eq)]
pub struct StreamKey {
    master_seed: u64,
    path: Vec<(String, u64)>,
    digest: [u8; 32],
}

impl std::fmt::Debug for StreamKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "StreamKey({}", self.master_seed)?;
        for (label, index) in &self.path {
            write!(f, "/{label}:{index}")?;
        }
        write!(f, ")")
    }
}

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"raptt/stream-root");
        h.update(master_seed.to_le_bytes());
        Self {
            master_seed,
            path: Vec::new(),
            digest: h.finalize().into(),
        }
    }

    /// Key of the substream `label:index` below this one.
    pub fn child(&self, label: &str, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(self.digest);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        h.update(index.to_le_bytes());
        let mut path = self.path.clone();
        path.push((label.to_owned(), index));
        Self {
            master_seed: self.master_seed,
            path,
            digest: h.finalize().into(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[(String, u64)] {
        &self.path
    }

    /// Opens the stream for this key. Opening twice replays the same values.
    pub fn stream(&self) -> Stream {
        ChaCha8Rng::from_seed(self.digest)
    }
}

pub fn fill_gaussian<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}

/// `rows x cols` matrix of iid standard normal entries, filled column by column.
pub fn gaussian_matrix(rows: usize, cols: usize, key: &StreamKey) -> DMatrix<f64> {
    let mut rng = key.stream();
    gaussian_matrix_from(&mut rng, rows, cols)
}

pub fn gaussian_matrix_from<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let len = rows.checked_mul(cols).expect("matrix size overflows usize");
    let mut data = vec![0.0; len];
    fill_gaussian(rng, &mut data);
    DMatrix::from_vec(rows, cols, data)
}

/// Uniform permutation of `0..p` (Fisher-Yates).
pub fn random_permutation(p: usize, key: &StreamKey) -> Vec<usize> {
    let mut rng = key.stream();
    random_permutation_from(&mut rng, p)
}

pub fn random_permutation_from<R: Rng + ?Sized>(rng: &mut R, p: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..p).collect();
    for i in (1..p).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}
