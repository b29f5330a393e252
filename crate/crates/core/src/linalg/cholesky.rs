use super::{tol, Matrix};
use crate::error::{LmsError, Result};

/// Lower-triangular factor of `A + jitter·I`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub l: Matrix,
    /// The jitter actually added, after any escalation.
    pub jitter: f64,
}

/// Cholesky factorisation with escalating diagonal jitter.
///
/// Tries `jitter` first, then multiplies it by 10 (starting from
/// `1e-10·mean diag` when `jitter` is zero) until the factorisation succeeds
/// or the jitter would exceed `1e-4·trace(A)/n`.
pub fn cholesky_jitter(a: &Matrix, jitter: f64) -> Result<CholeskyFactor> {
    let n = a.rows();
    if !a.is_square() || n == 0 {
        return Err(LmsError::Shape(format!(
            "cholesky needs a non-empty square matrix, got {:?}",
            a.shape()
        )));
    }
    if !(jitter >= 0.0) || !jitter.is_finite() {
        return Err(LmsError::InvalidArgument(format!("jitter {jitter}")));
    }
    let asym = a.asymmetry();
    if asym > tol::SYMMETRY * a.max_abs().max(f64::MIN_POSITIVE) {
        return Err(LmsError::NotSymmetric(asym));
    }
    let mean_diag = a.trace() / n as f64;
    let cap = 1e-4 * mean_diag.max(0.0);
    let mut current = jitter;
    loop {
        if let Some(l) = try_factor(a, current) {
            return Ok(CholeskyFactor { l, jitter: current });
        }
        current = if current == 0.0 {
            1e-10 * mean_diag
        } else {
            current * 10.0
        };
        if !(current > 0.0) || current > cap {
            return Err(LmsError::NotPositiveSemiDefinite { cap });
        }
    }
}

fn try_factor(a: &Matrix, jitter: f64) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = l.row(j)[..j].to_vec();
        let d = a[(j, j)] + jitter - lj.iter().map(|x| x * x).sum::<f64>();
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let li = &l.row(i)[..j];
            let s: f64 = li.iter().zip(&lj).map(|(x, y)| x * y).sum();
            l[(i, j)] = (a[(i, j)] - s) / djj;
        }
    }
    Some(l)
}
