//! Principal-component scores, alignment and the concentration error.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{LmsError, Result};
use crate::kernels::{gram, kernel_eval, KernelSpec, RANK_TOL};
use crate::latent::{LatentPoint, LatentSample};
use crate::linalg::{dist, procrustes, sym_eig_top, Matrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Embedding {
    /// Row i is ζ_i.
    pub scores: Matrix,
    /// Top eigenvalues of `(np)⁻¹YᵀY`.
    pub eigenvalues: Vec<f64>,
    pub centered: bool,
    pub r: usize,
    /// Columns of the data matrix the scores came from.
    pub p: usize,
    /// Number of columns with a non-negligible eigenvalue.
    pub rank: usize,
}

impl Embedding {
    pub fn n(&self) -> usize {
        self.scores.rows()
    }

    /// Scores scaled by `p^{-1/2}`, the scale on which they estimate φ.
    pub fn normalized_scores(&self) -> Matrix {
        self.scores.scaled(1.0 / (self.p as f64).sqrt())
    }

    /// The leading `k` score columns.
    pub fn truncate(&self, k: usize) -> Result<Embedding> {
        if k == 0 || k > self.r {
            return Err(LmsError::InvalidArgument(format!(
                "cannot truncate a dimension-{} embedding to {k}",
                self.r
            )));
        }
        Ok(Embedding {
            scores: self.scores.leading_columns(k),
            eigenvalues: self.eigenvalues[..k].to_vec(),
            centered: self.centered,
            r: k,
            p: self.p,
            rank: self.rank.min(k),
        })
    }

    /// Scores as CSV with columns `pc1..pcr`.
    pub fn write_scores_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record((1..=self.r).map(|k| format!("pc{k}")))?;
        for row in self.scores.row_iter() {
            out.write_record(row.iter().map(|v| v.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Eigenvalues as CSV with columns `index,eigenvalue`.
    pub fn write_eigenvalues_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "eigenvalue"])?;
        for (k, v) in self.eigenvalues.iter().enumerate() {
            out.write_record([(k + 1).to_string(), v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check_r(y: &Matrix, r: usize) -> Result<()> {
    let (n, p) = y.shape();
    if r == 0 || r > n.min(p) {
        return Err(LmsError::InvalidArgument(format!(
            "embedding dimension {r} outside 1..={} for a {n}x{p} matrix",
            n.min(p)
        )));
    }
    Ok(())
}

fn effective_rank(values: &[f64], r: usize) -> Result<usize> {
    let lmax = values.first().copied().unwrap_or(0.0);
    if !(lmax > 0.0) {
        return Err(LmsError::RankDeficient { rank: 0, requested: r });
    }
    Ok(values.iter().filter(|&&v| v > RANK_TOL * lmax).count())
}

/// PC scores of `y`, through the smaller of the two Gram matrices.
pub fn pc_scores(y: &Matrix, r: usize, centered: bool) -> Result<Embedding> {
    if y.rows() <= y.cols() {
        scores_gram_route(y, r, centered)
    } else {
        scores_covariance_route(y, r, centered)
    }
}

/// Scores `√p·U_Y Λ_Y^{1/2}` from the eigensystem of `p⁻¹YYᵀ`.
pub fn scores_gram_route(y: &Matrix, r: usize, centered: bool) -> Result<Embedding> {
    check_r(y, r)?;
    let yc = if centered { y.row_centered() } else { y.clone() };
    let (n, p) = yc.shape();
    let g = yc.row_gram().scaled(1.0 / p as f64);
    let e = sym_eig_top(&g, r)?;
    let rank = effective_rank(&e.values, r)?;
    let sp = (p as f64).sqrt();
    let scores = Matrix::from_fn(n, r, |i, k| {
        if k < rank {
            sp * e.vectors[(i, k)] * e.values[k].sqrt()
        } else {
            0.0
        }
    });
    let eigenvalues = e.values.iter().map(|v| v.max(0.0) / n as f64).collect();
    Ok(Embedding {
        scores,
        eigenvalues,
        centered,
        r,
        p,
        rank,
    })
}

/// Scores `Y V_Y` from the eigenvectors of `YᵀY`.
pub fn scores_covariance_route(y: &Matrix, r: usize, centered: bool) -> Result<Embedding> {
    check_r(y, r)?;
    let yc = if centered { y.row_centered() } else { y.clone() };
    let (n, p) = yc.shape();
    let c = yc.col_gram().scaled(1.0 / p as f64);
    let e = sym_eig_top(&c, r)?;
    let rank = effective_rank(&e.values, r)?;
    let mut scores = yc.matmul(&e.vectors)?;
    for i in 0..n {
        for k in rank..r {
            scores[(i, k)] = 0.0;
        }
    }
    let eigenvalues = e.values.iter().map(|v| v.max(0.0) / n as f64).collect();
    Ok(Embedding {
        scores,
        eigenvalues,
        centered,
        r,
        p,
        rank,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub q: Matrix,
    /// `max_i ‖p^{-1/2}ζ_i Q − φ(Z_i)‖`.
    pub uniform_error: f64,
    /// `max_{i,j} |p^{-1/2}‖ζ_i − ζ_j‖ − ‖φ(Z_i) − φ(Z_j)‖|`.
    pub pairwise_error: f64,
}

/// Aligns normalised scores to `targets` by orthogonal Procrustes.
pub fn align(embedding: &Embedding, targets: &Matrix) -> Result<AlignmentReport> {
    let a = embedding.normalized_scores();
    if a.shape() != targets.shape() {
        return Err(LmsError::Shape(format!(
            "scores {:?} vs targets {:?}",
            a.shape(),
            targets.shape()
        )));
    }
    let q = procrustes(&a, targets)?;
    let aq = a.matmul(&q)?;
    let n = a.rows();
    let uniform_error = (0..n)
        .map(|i| dist(aq.row(i), targets.row(i)))
        .fold(0.0, f64::max);
    let mut pairwise_error = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (dist(a.row(i), a.row(j)) - dist(targets.row(i), targets.row(j))).abs();
            pairwise_error = pairwise_error.max(d);
        }
    }
    Ok(AlignmentReport {
        q,
        uniform_error,
        pairwise_error,
    })
}

/// Kernel centred at the sample `Z`:
/// `f(z,z′) − mean_i f(Z_i,z) − mean_i f(Z_i,z′) + mean_ij f(Z_i,Z_j)`.
pub fn centered_kernel(
    kernel: &KernelSpec,
    z: &LatentSample,
    a: LatentPoint<'_>,
    b: LatentPoint<'_>,
) -> Result<f64> {
    let n = z.len() as f64;
    let mut ma = 0.0;
    let mut mb = 0.0;
    for i in 0..z.len() {
        ma += kernel_eval(kernel, z.point(i), a)?;
        mb += kernel_eval(kernel, z.point(i), b)?;
    }
    let k = gram(kernel, z)?;
    let total: f64 = k.as_slice().iter().sum();
    Ok(kernel_eval(kernel, a, b)? - ma / n - mb / n + total / (n * n))
}

/// `[f̃(Z_i, Z_j)]` evaluated entry by entry from the centring formula.
pub fn centered_gram(kernel: &KernelSpec, z: &LatentSample) -> Result<Matrix> {
    let k = gram(kernel, z)?;
    let n = k.rows();
    let nf = n as f64;
    let means: Vec<f64> = k.row_iter().map(|r| r.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / nf;
    Ok(Matrix::from_fn(n, n, |i, j| k[(i, j)] - means[i] - means[j] + grand))
}
