use super::{dot, tol, Matrix};
use crate::error::{LmsError, Result};

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// m×q with orthonormal columns, q = min(m, k).
    pub u: Matrix,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// k×q with orthonormal columns.
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let us = Matrix::from_fn(self.u.rows(), self.u.cols(), |i, j| self.u[(i, j)] * self.s[j]);
        us.matmul(&self.v.transpose()).expect("svd factors conform")
    }
}

/// One-sided Jacobi SVD.
pub fn svd_thin(a: &Matrix) -> Result<Svd> {
    let (m, k) = a.shape();
    if m == 0 || k == 0 {
        return Err(LmsError::InvalidArgument("svd of an empty matrix".into()));
    }
    if let Some(pos) = a.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(LmsError::NonFinite {
            row: pos / k,
            col: pos % k,
        });
    }
    if m < k {
        let t = svd_tall(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    svd_tall(a)
}

fn svd_tall(a: &Matrix) -> Result<Svd> {
    let (m, k) = a.shape();
    // Columns of A and of V stored as rows so rotations are contiguous.
    let mut uc = a.transpose();
    let mut vc = Matrix::identity(k);
    let mut converged = false;
    for _ in 0..tol::JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let alpha = dot(uc.row(p), uc.row(p));
                let beta = dot(uc.row(q), uc.row(q));
                let gamma = dot(uc.row(p), uc.row(q));
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut uc, p, q, c, s);
                rotate_rows(&mut vc, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LmsError::NoConvergence);
    }

    let norms: Vec<f64> = (0..k).map(|j| dot(uc.row(j), uc.row(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let smax = norms[order[0]];
    let cutoff = smax * (m.max(k) as f64) * f64::EPSILON;

    let mut u_rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut s = Vec::with_capacity(k);
    let mut v = Matrix::zeros(k, k);
    for (c, &j) in order.iter().enumerate() {
        for i in 0..k {
            v[(i, c)] = vc[(j, i)];
        }
        if norms[j] > cutoff && norms[j] > 0.0 {
            s.push(norms[j]);
            u_rows.push(uc.row(j).iter().map(|x| x / norms[j]).collect());
        } else {
            s.push(norms[j]);
            u_rows.push(complete_basis(&u_rows, m));
        }
    }
    let u = Matrix::from_fn(m, k, |i, j| u_rows[j][i]);
    Ok(Svd { u, s, v })
}

fn rotate_rows(mat: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = mat.cols();
    let data = mat.as_mut_slice();
    let (lo, hi) = data.split_at_mut(q * cols);
    let rp = &mut lo[p * cols..(p + 1) * cols];
    let rq = &mut hi[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// A unit vector orthogonal to `basis`, found by Gram–Schmidt on the
/// standard basis vectors.
fn complete_basis(basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut best: Option<Vec<f64>> = None;
    let mut best_norm = 0.0;
    for e in 0..m {
        let mut x = vec![0.0; m];
        x[e] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let c = dot(&x, b);
                for (xi, bi) in x.iter_mut().zip(b) {
                    *xi -= c * bi;
                }
            }
        }
        let n = dot(&x, &x).sqrt();
        if n > best_norm {
            best_norm = n;
            best = Some(x);
            if n > 0.5 {
                break;
            }
        }
    }
    let x = best.unwrap_or_else(|| vec![0.0; m]);
    x.iter().map(|v| v / best_norm.max(f64::MIN_POSITIVE)).collect()
}
