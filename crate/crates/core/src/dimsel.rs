//! PCA dimension selection by split-half Wasserstein distance, and a
//! profile-likelihood elbow baseline.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LmsError, Result};
use crate::kernels::RANK_TOL;
use crate::linalg::{sym_eig, sym_eig_top, Matrix};
use crate::rng::{kind_rng, StreamKind};
use crate::transport::transport_with_costs;

/// Default cap on the candidate dimensions.
pub const DEFAULT_R_CAP: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimSelectMethod {
    Wasserstein,
    Elbow,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimSelectReport {
    /// `(r, d_r)`; the selected r minimises `d_r`.
    pub curve: Vec<(usize, f64)>,
    pub selected: usize,
    pub method: DimSelectMethod,
    pub r_grid: Vec<usize>,
    /// Set when the elbow spectrum was flat.
    #[serde(default)]
    pub degenerate: bool,
    /// Result of an externally run ladle estimate, if supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_ladle: Option<usize>,
}

impl DimSelectReport {
    pub fn write_curve_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["r", "d_r"])?;
        for (r, d) in &self.curve {
            out.write_record([r.to_string(), d.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `min(50, ⌈n/2⌉, p)`.
pub fn default_r_max(n: usize, p: usize) -> usize {
    DEFAULT_R_CAP.min(n.div_ceil(2)).min(p)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitOptions {
    /// Shuffle rows (keyed by the seed) before the first/second half split.
    #[serde(default)]
    pub shuffle: bool,
}

/// Split-half Wasserstein selection over `r = 1..=r_max` with the literal
/// first-half/second-half split.
pub fn wasserstein_dimension_select(y: &Matrix, r_max: usize, seed: u64) -> Result<DimSelectReport> {
    wasserstein_dimension_select_with(y, r_max, seed, SplitOptions::default())
}

pub fn wasserstein_dimension_select_with(
    y: &Matrix,
    r_max: usize,
    seed: u64,
    options: SplitOptions,
) -> Result<DimSelectReport> {
    let (n, p) = y.shape();
    if n < 4 {
        return Err(LmsError::InvalidArgument(format!("need at least 4 rows, got {n}")));
    }
    let h = n.div_ceil(2);
    if r_max == 0 || r_max > h.min(p) {
        return Err(LmsError::InvalidArgument(format!(
            "r_max {r_max} outside 1..={}",
            h.min(p)
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if options.shuffle {
        order.shuffle(&mut kind_rng(seed, StreamKind::Shuffle, 0));
    }
    let y1 = y.select_rows(&order[..h]);
    let y2 = y.select_rows(&order[h..]);
    let curve = split_half_curve(&y1, &y2, r_max)?;
    let selected = argmin(&curve);
    Ok(DimSelectReport {
        r_grid: curve.iter().map(|c| c.0).collect(),
        curve,
        selected,
        method: DimSelectMethod::Wasserstein,
        degenerate: false,
        external_ladle: None,
    })
}

fn argmin(curve: &[(usize, f64)]) -> usize {
    let mut best = curve[0];
    for &c in &curve[1..] {
        if c.1 < best.1 {
            best = c;
        }
    }
    best.0
}

/// Leading right singular vectors of `Y1` as columns, with directions of
/// negligible singular value zeroed.
fn projection_basis(y1: &Matrix, r_max: usize) -> Result<Matrix> {
    let (h, p) = y1.shape();
    let (values, mut v) = if h <= p {
        // V = Y1ᵀ U Λ^{-1/2} from the small Gram matrix.
        let e = sym_eig_top(&y1.row_gram(), r_max)?;
        let mut v = y1.t_matmul(&e.vectors)?;
        for k in 0..r_max {
            let s = if e.values[k] > 0.0 { 1.0 / e.values[k].sqrt() } else { 0.0 };
            for i in 0..p {
                v[(i, k)] *= s;
            }
        }
        (e.values, v)
    } else {
        let e = sym_eig_top(&y1.col_gram(), r_max)?;
        (e.values, e.vectors)
    };
    let lmax = values[0].max(0.0);
    for k in 0..r_max {
        if !(values[k] > RANK_TOL * lmax && values[k] > 0.0) {
            for i in 0..p {
                v[(i, k)] = 0.0;
            }
        }
    }
    Ok(v)
}

/// `d_r` for `r = 1..=r_max` between the projected first half and the second.
pub fn split_half_curve(y1: &Matrix, y2: &Matrix, r_max: usize) -> Result<Vec<(usize, f64)>> {
    let (h, n2) = (y1.rows(), y2.rows());
    if h == 0 || n2 == 0 || y1.cols() != y2.cols() {
        return Err(LmsError::Shape("split halves must be non-empty and conform".into()));
    }
    let v = projection_basis(y1, r_max)?;
    let s1 = y1.matmul(&v)?;
    let s2 = y2.matmul(&v)?;
    let wa = vec![1.0 / h as f64; h];
    let wb = vec![1.0 / n2 as f64; n2];

    // With x̂_i = V s1_i: ‖x̂_i − y_j‖² = ‖s1_i − s2_j‖² + ‖y_j − V s2_j‖².
    // Both terms are accumulated without cancellation.
    let mut resid = y2.clone();
    let mut coord_sq = Matrix::zeros(h, n2);
    let mut cost_mats = Vec::with_capacity(r_max);
    for k in 0..r_max {
        for j in 0..n2 {
            let c = s2[(j, k)];
            if c != 0.0 {
                let row = resid.row_mut(j);
                for (i, x) in row.iter_mut().enumerate() {
                    *x -= c * v[(i, k)];
                }
            }
        }
        let resid_sq: Vec<f64> = resid.row_iter().map(|r| r.iter().map(|x| x * x).sum()).collect();
        for i in 0..h {
            let a = s1[(i, k)];
            for (j, d) in coord_sq.row_mut(i).iter_mut().enumerate() {
                let t = a - s2[(j, k)];
                *d += t * t;
            }
        }
        let c = Matrix::from_fn(h, n2, |i, j| (coord_sq[(i, j)] + resid_sq[j]).sqrt());
        cost_mats.push(c);
    }
    cost_mats
        .into_par_iter()
        .enumerate()
        .map(|(k, c)| Ok((k + 1, transport_with_costs(&c, &wa, &wb)?.cost)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    pub selected: usize,
    pub degenerate: bool,
}

/// Full spectrum of `p⁻¹` times the smaller of `YYᵀ` and `YᵀY`, the input
/// the elbow rule works on.
pub fn scree(y: &Matrix) -> Result<Vec<f64>> {
    let (n, p) = y.shape();
    let gram = if n <= p { y.row_gram() } else { y.col_gram() };
    Ok(sym_eig(&gram.scaled(1.0 / p as f64))?.values)
}

/// Two-segment Gaussian profile log-likelihood for each split `q`, with a
/// pooled variance; entry `q-1` is the value for the first `q` eigenvalues
/// in the upper segment.
pub fn elbow_profile(eigenvalues: &[f64]) -> Result<Vec<f64>> {
    let p = eigenvalues.len();
    if p < 2 {
        return Err(LmsError::InvalidArgument("elbow needs at least 2 eigenvalues".into()));
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(LmsError::InvalidArgument("non-finite eigenvalue".into()));
    }
    let mean_all = eigenvalues.iter().sum::<f64>() / p as f64;
    let total_var = eigenvalues.iter().map(|v| (v - mean_all).powi(2)).sum::<f64>() / p as f64;
    let floor = 1e-12 * total_var;
    let dof = if p > 2 { (p - 2) as f64 } else { 1.0 };
    Ok((1..p)
        .map(|q| {
            let (a, b) = eigenvalues.split_at(q);
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            let ss: f64 = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>()
                + b.iter().map(|v| (v - mb).powi(2)).sum::<f64>();
            let var = (ss / dof).max(floor);
            // −(p/2)·ln σ² − ss/(2σ²), constants dropped.
            -(p as f64) / 2.0 * var.ln() - ss / (2.0 * var)
        })
        .collect())
}

/// Split point maximising the profile likelihood; ties go to the smaller split.
pub fn elbow_select(eigenvalues: &[f64]) -> Result<ElbowResult> {
    let p = eigenvalues.len();
    if p < 2 {
        return Err(LmsError::InvalidArgument("elbow needs at least 2 eigenvalues".into()));
    }
    let first = eigenvalues[0];
    if eigenvalues.iter().all(|&v| v == first) {
        return Ok(ElbowResult {
            selected: 1,
            degenerate: true,
        });
    }
    let prof = elbow_profile(eigenvalues)?;
    let mut best = 0;
    for q in 1..prof.len() {
        if prof[q] > prof[best] {
            best = q;
        }
    }
    Ok(ElbowResult {
        selected: best + 1,
        degenerate: false,
    })
}

/// Elbow selection packaged as a report whose curve is the negative profile
/// log-likelihood.
pub fn elbow_report(eigenvalues: &[f64]) -> Result<DimSelectReport> {
    let res = elbow_select(eigenvalues)?;
    let curve: Vec<(usize, f64)> = if res.degenerate {
        (1..eigenvalues.len()).map(|q| (q, 0.0)).collect()
    } else {
        elbow_profile(eigenvalues)?
            .into_iter()
            .enumerate()
            .map(|(k, v)| (k + 1, -v))
            .collect()
    };
    Ok(DimSelectReport {
        r_grid: curve.iter().map(|c| c.0).collect(),
        curve,
        selected: res.selected,
        method: DimSelectMethod::Elbow,
        degenerate: res.degenerate,
        external_ladle: None,
    })
}
