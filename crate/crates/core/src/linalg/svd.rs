//! One-sided Jacobi SVD for small dense matrices.
//!
//! Tall inputs with many more rows than columns are first reduced with a
//! Householder QR so the Jacobi sweeps run on the square triangular factor.

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100;
pub const ROTATION_TOL: f64 = 1e-14;

/// Thin SVD `m = U diag(σ) Vᵀ` with `k = min(rows, cols)` singular triplets.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// `rows × k`, orthonormal columns.
    pub left_vectors: Matrix,
    /// `cols × k`, orthonormal columns.
    pub right_vectors: Matrix,
}

impl SvdResult {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Second singular value, 0 when there is only one.
    pub fn sigma_second(&self) -> f64 {
        self.singular_values.get(1).copied().unwrap_or(0.0)
    }

    pub fn left(&self, j: usize) -> Vec<f64> {
        self.left_vectors.column(j)
    }

    pub fn right(&self, j: usize) -> Vec<f64> {
        self.right_vectors.column(j)
    }

    pub fn reconstruct(&self) -> Matrix {
        let us = self
            .left_vectors
            .transpose()
            .scale_rows(&self.singular_values)
            .expect("consistent svd shapes")
            .transpose();
        us.matmul(&self.right_vectors.transpose())
            .expect("consistent svd shapes")
    }
}

pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::InvalidArgument(format!(
            "svd of empty {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("svd input".into()));
    }
    if m.rows() >= m.cols() {
        svd_tall(m)
    } else {
        let t = svd_tall(&m.transpose())?;
        Ok(SvdResult {
            singular_values: t.singular_values,
            left_vectors: t.right_vectors,
            right_vectors: t.left_vectors,
        })
    }
}

/// Singular values only; same algorithm as [`svd`].
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    Ok(svd(m)?.singular_values)
}

fn svd_tall(m: &Matrix) -> Result<SvdResult> {
    let (rows, cols) = m.shape();
    if rows > 2 * cols {
        let qr = HouseholderQr::new(m);
        let r = qr.r();
        let inner = jacobi(&r)?;
        let left = qr.apply_q(&inner.left_vectors);
        return Ok(SvdResult {
            singular_values: inner.singular_values,
            left_vectors: left,
            right_vectors: inner.right_vectors,
        });
    }
    jacobi(m)
}

/// One-sided (Hestenes) Jacobi on the columns of a `rows ≥ cols` matrix.
fn jacobi(m: &Matrix) -> Result<SvdResult> {
    let (rows, cols) = m.shape();
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            e
        })
        .collect();
    // Rounding in a length-`rows` dot product bounds the attainable orthogonality.
    let tol = ROTATION_TOL.max(rows as f64 * f64::EPSILON);
    // Columns at the rounding level of the whole matrix carry no direction
    // worth orthogonalizing; rotating them only chases noise.
    let fro2: f64 = a.iter().map(|c| dot(c, c)).sum();
    let noise2 = f64::EPSILON * f64::EPSILON * fro2;

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma == 0.0 || alpha <= noise2 || beta <= noise2 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps: MAX_SWEEPS });
    }

    let norms: Vec<f64> = a.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let sigma_max = norms[order[0]];
    let negligible = sigma_max * rows as f64 * f64::EPSILON;
    let mut u_cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(cols);
    let mut sv = Vec::with_capacity(cols);
    let mut right = Matrix::zeros(cols, cols);
    for (k, &j) in order.iter().enumerate() {
        sv.push(norms[j]);
        for i in 0..cols {
            right[(i, k)] = v[j][i];
        }
        if norms[j] > negligible && norms[j] > 0.0 {
            u_cols.push(Some(a[j].iter().map(|x| x / norms[j]).collect()));
        } else {
            u_cols.push(None);
        }
    }
    let u = complete_orthonormal(rows, u_cols);
    let mut left = Matrix::zeros(rows, cols);
    for (k, col) in u.iter().enumerate() {
        for i in 0..rows {
            left[(i, k)] = col[i];
        }
    }
    Ok(SvdResult {
        singular_values: sv,
        left_vectors: left,
        right_vectors: right,
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the `None` slots with unit vectors orthogonal to every other column.
fn complete_orthonormal(dim: usize, cols: Vec<Option<Vec<f64>>>) -> Vec<Vec<f64>> {
    let mut done: Vec<Vec<f64>> = cols.iter().flatten().cloned().collect();
    let mut candidate = 0usize;
    let mut out = Vec::with_capacity(cols.len());
    for c in cols {
        match c {
            Some(c) => out.push(c),
            None => loop {
                assert!(candidate < dim, "orthonormal completion ran out of candidates");
                let mut e = vec![0.0; dim];
                e[candidate] = 1.0;
                candidate += 1;
                for _ in 0..2 {
                    for d in &done {
                        let proj = dot(&e, d);
                        e.iter_mut().zip(d).for_each(|(x, y)| *x -= proj * y);
                    }
                }
                let n = dot(&e, &e).sqrt();
                if n > 0.5 {
                    e.iter_mut().for_each(|x| *x /= n);
                    done.push(e.clone());
                    out.push(e);
                    break;
                }
            },
        }
    }
    out
}

struct HouseholderQr {
    rows: usize,
    cols: usize,
    /// Packed factor: R on and above the diagonal.
    packed: Matrix,
    /// Householder vectors, one per column, stored with their leading index.
    reflectors: Vec<Vec<f64>>,
}

impl HouseholderQr {
    fn new(m: &Matrix) -> Self {
        let (rows, cols) = m.shape();
        let mut a = m.clone();
        let mut reflectors = Vec::with_capacity(cols);
        for k in 0..cols {
            let mut x: Vec<f64> = (k..rows).map(|i| a[(i, k)]).collect();
            let alpha = dot(&x, &x).sqrt();
            if alpha == 0.0 {
                reflectors.push(vec![0.0; rows - k]);
                continue;
            }
            let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
            x[0] += sign * alpha;
            let nx = dot(&x, &x).sqrt();
            x.iter_mut().for_each(|v| *v /= nx);
            for j in k..cols {
                let s: f64 = (k..rows).map(|i| x[i - k] * a[(i, j)]).sum();
                for i in k..rows {
                    a[(i, j)] -= 2.0 * s * x[i - k];
                }
            }
            reflectors.push(x);
        }
        Self {
            rows,
            cols,
            packed: a,
            reflectors,
        }
    }

    fn r(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.cols, |i, j| {
            if j >= i {
                self.packed[(i, j)]
            } else {
                0.0
            }
        })
    }

    /// `Q * [b; 0]` for a `cols × k` block `b`.
    fn apply_q(&self, b: &Matrix) -> Matrix {
        let k = b.cols();
        let mut out = Matrix::zeros(self.rows, k);
        for i in 0..self.cols {
            out.row_mut(i).copy_from_slice(b.row(i));
        }
        for (kk, x) in self.reflectors.iter().enumerate().rev() {
            for j in 0..k {
                let s: f64 = (kk..self.rows).map(|i| x[i - kk] * out[(i, j)]).sum();
                if s != 0.0 {
                    for i in kk..self.rows {
                        out[(i, j)] -= 2.0 * s * x[i - kk];
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_orthonormal(m: &Matrix) {
        let g = m.transpose().matmul(m).unwrap();
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-12, "gram[{i},{j}] = {}", g[(i, j)]);
            }
        }
    }

    #[test]
    fn identity() {
        let s = svd(&Matrix::identity(3)).unwrap();
        assert_eq!(s.singular_values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn permuted_diagonal() {
        let m = Matrix::from_rows(&[
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![3.0, 0.0, 0.0],
        ])
        .unwrap();
        let s = svd(&m).unwrap();
        for (a, b) in s.singular_values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_matrix_gets_orthonormal_bases() {
        let s = svd(&Matrix::zeros(4, 3)).unwrap();
        assert_eq!(s.singular_values, vec![0.0; 3]);
        check_orthonormal(&s.left_vectors);
        check_orthonormal(&s.right_vectors);
    }

    #[test]
    fn tall_path_uses_qr() {
        let m = Matrix::from_fn(20, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + 0.1 * j as f64);
        let s = svd(&m).unwrap();
        check_orthonormal(&s.left_vectors);
        check_orthonormal(&s.right_vectors);
        let err = s.reconstruct().sub(&m).unwrap().frobenius_norm();
        assert!(err < 1e-12 * s.sigma_max());
    }

    #[test]
    fn wide_input() {
        let m = Matrix::from_fn(2, 5, |i, j| (i as f64 + 1.0) * (j as f64 - 2.0) + (i * j) as f64);
        let s = svd(&m).unwrap();
        assert_eq!(s.left_vectors.shape(), (2, 2));
        assert_eq!(s.right_vectors.shape(), (5, 2));
        let err = s.reconstruct().sub(&m).unwrap().frobenius_norm();
        assert!(err < 1e-12 * s.sigma_max());
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = Matrix::identity(2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&m), Err(Error::NonFinite(_))));
    }
}
