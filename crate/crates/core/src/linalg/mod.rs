//! Small dense linear algebra: storage, products, Kronecker product, SVD,
//! numerical rank, norms and a Cholesky solver.

mod matrix;
mod svd;

pub use matrix::{dot, norm2, Matrix};
pub use svd::{singular_values, svd, SvdResult, MAX_SWEEPS, ROTATION_TOL};

use crate::error::{Error, Result};

/// Default multiplier for the numerical-rank threshold.
pub const DEFAULT_TOL_FACTOR: f64 = 1.0;

/// Kronecker product: entry `(i·b.rows + k, j·b.cols + l)` is `a[i,j]·b[k,l]`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for k in 0..br {
                let row = out.row_mut(i * br + k);
                let dst = &mut row[j * bc..(j + 1) * bc];
                for (d, &v) in dst.iter_mut().zip(b.row(k)) {
                    *d = s * v;
                }
            }
        }
    }
    out
}

/// Kronecker product of two vectors (as column vectors).
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// Threshold below which a singular value counts as zero.
pub fn rank_threshold(sigma_max: f64, rows: usize, cols: usize, tol_factor: f64) -> f64 {
    tol_factor * sigma_max * rows.max(cols) as f64 * f64::EPSILON
}

/// Number of singular values above `tol_factor·σ₁·max(rows, cols)·ε`.
pub fn numerical_rank(m: &Matrix, tol_factor: f64) -> Result<usize> {
    let sv = singular_values(m)?;
    Ok(rank_from_singular_values(&sv, m.rows(), m.cols(), tol_factor))
}

pub fn rank_from_singular_values(sv: &[f64], rows: usize, cols: usize, tol_factor: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    let thr = rank_threshold(smax, rows, cols, tol_factor);
    sv.iter().filter(|&&s| s > thr).count()
}

pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.sigma_max())
}

/// `sqrt(Σ ‖W_l‖_F²)` over a collection of matrices.
pub fn frobenius_norm_collection<'a>(ws: impl IntoIterator<Item = &'a Matrix>) -> f64 {
    ws.into_iter()
        .map(|w| w.as_slice().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Returns `None` when a pivot is not strictly positive.
    pub fn new(a: &Matrix) -> Option<Self> {
        let n = a.rows();
        if a.cols() != n {
            return None;
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)] - dot(&l.row(j)[..j], &l.row(j)[..j]);
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                l[(i, j)] = s / d;
            }
        }
        Some(Self { l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            let s = dot(&self.l.row(i)[..i], &y[..i]);
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Squared ratio of the extreme diagonal pivots; a cheap condition proxy.
    pub fn condition_estimate(&self) -> f64 {
        let d: Vec<f64> = (0..self.l.rows()).map(|i| self.l[(i, i)]).collect();
        let max = d.iter().cloned().fold(0.0, f64::max);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        (max / min).powi(2)
    }
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.rows() != b.len() {
        return Err(Error::shape("solve_spd", a.rows(), b.len()));
    }
    let chol = Cholesky::new(a).ok_or(Error::LinearSolve {
        damping: 0.0,
        condition: f64::INFINITY,
    })?;
    Ok(chol.solve(b))
}
