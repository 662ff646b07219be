//! Structured covariance matrices used by the simulation design.
//!
//! * `Σ₁ = I`
//! * `Σ₂ = diag(λ)` with `λ_i = 20/i` for `i ≤ 20` and `1` afterwards
//! * `Σ₃` symmetric Toeplitz generated by `(1, 0.4, 0, …)` (tridiagonal)
//! * `Σ₄` block diagonal with `25 x 25` blocks `0.85 I + 0.15 11'`
//!
//! Every structure supports products, a Cholesky factor, solves and
//! `tr(Σ²)` without forming a dense `p x p` matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const SIGMA4_BLOCK: usize = 25;

#[derive(Debug, Clone)]
enum Structure {
    Identity,
    Diagonal(Vec<f64>),
    /// Symmetric tridiagonal with constant diagonal and off-diagonal. The
    /// Cholesky factor is lower bidiagonal: `chol_diag[i]` on the diagonal,
    /// `chol_sub[i]` at `(i+1, i)`.
    Tridiagonal {
        diag: f64,
        off: f64,
        chol_diag: Vec<f64>,
        chol_sub: Vec<f64>,
    },
    BlockDiagonal {
        block: DMatrix<f64>,
        chol: DMatrix<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct CovarianceSpec {
    id: u8,
    p: usize,
    structure: Structure,
}

/// Builds `Σ_id` in dimension `p`.
pub fn make_sigma(id: u8, p: usize) -> Result<CovarianceSpec> {
    if p == 0 {
        return Err(Error::Config("dimension must be positive".into()));
    }
    let structure = match id {
        1 => Structure::Identity,
        2 => Structure::Diagonal(
            (1..=p)
                .map(|i| if i <= 20 { 20.0 / i as f64 } else { 1.0 })
                .collect(),
        ),
        3 => {
            let (diag, off): (f64, f64) = (1.0, 0.4);
            let mut chol_diag = Vec::with_capacity(p);
            let mut chol_sub = Vec::with_capacity(p.saturating_sub(1));
            let mut prev = diag.sqrt();
            chol_diag.push(prev);
            for _ in 1..p {
                let l = off / prev;
                chol_sub.push(l);
                prev = (diag - l * l).sqrt();
                chol_diag.push(prev);
            }
            Structure::Tridiagonal {
                diag,
                off,
                chol_diag,
                chol_sub,
            }
        }
        4 => {
            if !p.is_multiple_of(SIGMA4_BLOCK) {
                return Err(Error::Config(format!(
                    "Σ4 needs p divisible by {SIGMA4_BLOCK}, got {p}"
                )));
            }
            let block = DMatrix::from_fn(SIGMA4_BLOCK, SIGMA4_BLOCK, |i, j| {
                if i == j {
                    1.0
                } else {
                    0.15
                }
            });
            let chol = block
                .clone()
                .cholesky()
                .expect("Σ4 block is positive definite")
                .unpack();
            Structure::BlockDiagonal { block, chol }
        }
        other => return Err(Error::Config(format!("unknown covariance id {other}"))),
    };
    Ok(CovarianceSpec { id, p, structure })
}

impl CovarianceSpec {
    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `Σ v`.
    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        m = self.mul_mat(&m);
        DVector::from_column_slice(m.as_slice())
    }

    /// `Σ A` for a `p x c` matrix.
    pub fn mul_mat(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.nrows(), self.p, "dimension mismatch in Σ A");
        match &self.structure {
            Structure::Identity => a.clone(),
            Structure::Diagonal(d) => {
                let mut out = a.clone();
                for (i, &di) in d.iter().enumerate() {
                    out.row_mut(i).scale_mut(di);
                }
                out
            }
            Structure::Tridiagonal { diag, off, .. } => {
                let mut out = a * *diag;
                let p = self.p;
                for c in 0..a.ncols() {
                    for i in 0..p {
                        let mut s = 0.0;
                        if i > 0 {
                            s += a[(i - 1, c)];
                        }
                        if i + 1 < p {
                            s += a[(i + 1, c)];
                        }
                        out[(i, c)] += off * s;
                    }
                }
                out
            }
            Structure::BlockDiagonal { block, .. } => {
                let mut out = DMatrix::zeros(a.nrows(), a.ncols());
                for b in 0..self.p / SIGMA4_BLOCK {
                    let r = b * SIGMA4_BLOCK;
                    let prod = block * a.rows(r, SIGMA4_BLOCK);
                    out.rows_mut(r, SIGMA4_BLOCK).copy_from(&prod);
                }
                out
            }
        }
    }

    /// `L A` where `Σ = L L'` (lower-triangular, structure-preserving).
    pub fn chol_mul_mat(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.nrows(), self.p, "dimension mismatch in L A");
        match &self.structure {
            Structure::Identity => a.clone(),
            Structure::Diagonal(d) => {
                let mut out = a.clone();
                for (i, &di) in d.iter().enumerate() {
                    out.row_mut(i).scale_mut(di.sqrt());
                }
                out
            }
            Structure::Tridiagonal {
                chol_diag, chol_sub, ..
            } => {
                let mut out = DMatrix::zeros(a.nrows(), a.ncols());
                for c in 0..a.ncols() {
                    for i in 0..self.p {
                        let mut s = chol_diag[i] * a[(i, c)];
                        if i > 0 {
                            s += chol_sub[i - 1] * a[(i - 1, c)];
                        }
                        out[(i, c)] = s;
                    }
                }
                out
            }
            Structure::BlockDiagonal { chol, .. } => {
                let mut out = DMatrix::zeros(a.nrows(), a.ncols());
                for b in 0..self.p / SIGMA4_BLOCK {
                    let r = b * SIGMA4_BLOCK;
                    let prod = chol * a.rows(r, SIGMA4_BLOCK);
                    out.rows_mut(r, SIGMA4_BLOCK).copy_from(&prod);
                }
                out
            }
        }
    }

    /// `Σ⁻¹ v` through the structured factorization.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.p, "dimension mismatch in Σ⁻¹ v");
        match &self.structure {
            Structure::Identity => v.clone(),
            Structure::Diagonal(d) => v.zip_map(&DVector::from_column_slice(d), |a, b| a / b),
            Structure::Tridiagonal {
                chol_diag, chol_sub, ..
            } => {
                let p = self.p;
                // L y = v
                let mut y = vec![0.0; p];
                for i in 0..p {
                    let mut s = v[i];
                    if i > 0 {
                        s -= chol_sub[i - 1] * y[i - 1];
                    }
                    y[i] = s / chol_diag[i];
                }
                // L' x = y
                let mut x = vec![0.0; p];
                for i in (0..p).rev() {
                    let mut s = y[i];
                    if i + 1 < p {
                        s -= chol_sub[i] * x[i + 1];
                    }
                    x[i] = s / chol_diag[i];
                }
                DVector::from_vec(x)
            }
            Structure::BlockDiagonal { block, .. } => {
                let chol = block.clone().cholesky().expect("Σ4 block is positive definite");
                let mut out = DVector::zeros(self.p);
                for b in 0..self.p / SIGMA4_BLOCK {
                    let r = b * SIGMA4_BLOCK;
                    let part = chol.solve(&v.rows(r, SIGMA4_BLOCK).into_owned());
                    out.rows_mut(r, SIGMA4_BLOCK).copy_from(&part);
                }
                out
            }
        }
    }

    /// `v' Σ⁻¹ v`.
    pub fn inv_quadratic_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&self.solve(v))
    }

    pub fn trace(&self) -> f64 {
        match &self.structure {
            Structure::Identity => self.p as f64,
            Structure::Diagonal(d) => d.iter().sum(),
            Structure::Tridiagonal { diag, .. } => diag * self.p as f64,
            Structure::BlockDiagonal { block, .. } => {
                block.trace() * (self.p / SIGMA4_BLOCK) as f64
            }
        }
    }

    /// `tr(Σ²)` in closed form.
    pub fn trace_sq(&self) -> f64 {
        match &self.structure {
            Structure::Identity => self.p as f64,
            Structure::Diagonal(d) => d.iter().map(|v| v * v).sum(),
            Structure::Tridiagonal { diag, off, .. } => {
                let p = self.p as f64;
                p * diag * diag + 2.0 * (p - 1.0) * off * off
            }
            Structure::BlockDiagonal { block, .. } => {
                block.norm_squared() * (self.p / SIGMA4_BLOCK) as f64
            }
        }
    }

    pub fn diagonal(&self) -> DVector<f64> {
        match &self.structure {
            Structure::Diagonal(d) => DVector::from_column_slice(d),
            Structure::Tridiagonal { diag, .. } => DVector::from_element(self.p, *diag),
            _ => DVector::from_element(self.p, 1.0),
        }
    }

    /// Dense `p x p` matrix. For tests and small dimensions.
    pub fn dense(&self) -> DMatrix<f64> {
        self.mul_mat(&DMatrix::identity(self.p, self.p))
    }
}
