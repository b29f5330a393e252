use serde::{Deserialize, Serialize};

use super::{tol, Matrix};
use crate::error::{LmsError, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues non-increasing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymEig {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns.
    pub vectors: Matrix,
}

impl SymEig {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Keeps the leading `r` pairs.
    pub fn truncate(mut self, r: usize) -> SymEig {
        let r = r.min(self.values.len());
        self.values.truncate(r);
        self.vectors = self.vectors.leading_columns(r);
        self
    }
}

/// Full eigendecomposition of a symmetric matrix.
pub fn sym_eig(a: &Matrix) -> Result<SymEig> {
    let n = a.rows();
    sym_eig_top(a, n)
}

/// The `r` largest eigenpairs of a symmetric matrix.
///
/// Householder tridiagonalisation followed by implicit QL, after the
/// EISPACK routines tred2/tql2. Each eigenvector's largest-magnitude entry is
/// made positive.
pub fn sym_eig_top(a: &Matrix, r: usize) -> Result<SymEig> {
    let n = a.rows();
    if !a.is_square() {
        return Err(LmsError::Shape(format!(
            "eigendecomposition needs a square matrix, got {:?}",
            a.shape()
        )));
    }
    if r == 0 || r > n {
        return Err(LmsError::InvalidArgument(format!(
            "requested {r} eigenpairs of a {n}x{n} matrix"
        )));
    }
    if let Some(pos) = a.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(LmsError::NonFinite {
            row: pos / n,
            col: pos % n,
        });
    }
    let scale = a.max_abs();
    let asym = a.asymmetry();
    if asym > tol::SYMMETRY * scale.max(f64::MIN_POSITIVE) {
        return Err(LmsError::NotSymmetric(asym));
    }

    // v[i][j] in row-major, symmetrised.
    let mut v: Vec<f64> = Matrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)])).into_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    // QL rotations act on pairs of columns of V; work on the transpose so
    // they touch contiguous rows.
    let mut w = transpose_sq(n, &v);
    tql2(n, &mut w, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps solver order among ties.
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    order.truncate(r);

    let mut values = Vec::with_capacity(r);
    let mut vectors = Matrix::zeros(n, r);
    for (c, &k) in order.iter().enumerate() {
        values.push(d[k]);
        let col = &w[k * n..(k + 1) * n];
        let mut big = 0usize;
        for i in 1..n {
            if col[i].abs() > col[big].abs() {
                big = i;
            }
        }
        let sign = if col[big] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, c)] = sign * col[i];
        }
    }
    Ok(SymEig { values, vectors })
}

fn transpose_sq(n: usize, v: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[j * n + i] = v[i * n + j];
        }
    }
    w
}

fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let idx = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
                v[idx(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for x in e.iter_mut().take(i) {
                *x = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[idx(j, i)] = f;
                g = e[j] + v[idx(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[idx(k, j)] * d[k];
                    e[k] += v[idx(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[idx(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[idx(n - 1, i)] = v[idx(i, i)];
        v[idx(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[idx(k, i + 1)] * v[idx(k, j)];
                }
                for k in 0..=i {
                    v[idx(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[idx(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
        v[idx(n - 1, j)] = 0.0;
    }
    v[idx(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal (d, e). `w` holds the transposed
/// accumulated transform; on return row k of `w` is the eigenvector for d[k].
fn tql2(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > tol::QL_ITERATIONS {
                    return Err(LmsError::NoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for x in d.iter_mut().take(n).skip(l + 2) {
                    *x -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = w.split_at_mut((i + 1) * n);
                    let wi = &mut lo[i * n..];
                    let wi1 = &mut hi[..n];
                    for (a, b) in wi.iter_mut().zip(wi1.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
