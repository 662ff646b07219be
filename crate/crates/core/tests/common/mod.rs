#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use raptt::linstat::DataMatrix;
use raptt::randsrc::{gaussian_matrix, StreamKey};

/// Uniformly random `p x p` orthogonal matrix.
pub fn random_rotation(p: usize, key: &StreamKey) -> DMatrix<f64> {
    let qr = gaussian_matrix(p, p, key).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `n x p` standard normal rows shifted by `shift`.
pub fn gaussian_data(n: usize, p: usize, shift: f64, key: &StreamKey) -> DataMatrix {
    let mut m = gaussian_matrix(n, p, key);
    m.add_scalar_mut(shift);
    DataMatrix::new(m).unwrap()
}

pub fn rotate(x: &DataMatrix, q: &DMatrix<f64>) -> DataMatrix {
    DataMatrix::new(x.values() * q).unwrap()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Pearson chi-square statistic of `counts` against equal cell probabilities.
pub fn chi_square_uniform(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

pub fn dense_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("invertible")
}

pub fn quad(v: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    (v.transpose() * m * v)[(0, 0)]
}
