//! Kernel families, Gram matrices, empirical feature maps and the induced
//! Riemannian metric.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LmsError, Result};
use crate::latent::{LatentPoint, LatentSample, LatentSpace};
use crate::linalg::{dot, sq_dist, sym_eig, sym_eig_top, Matrix};

/// Default numerical-rank threshold, relative to the largest eigenvalue.
pub const RANK_TOL: f64 = 1e-8;
/// Default Nyström anchor count.
pub const DEFAULT_ANCHORS: usize = 200;

/// A translation-invariant kernel `f(z, z′) = g(z − z′)` given as code.
pub trait TranslationProfile: Send + Sync + fmt::Debug {
    fn value(&self, u: &[f64]) -> f64;
    /// `−∇²g(0)` in dimension `d`.
    fn neg_hessian_at_origin(&self, d: usize) -> Matrix;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `g(u) = exp(−‖u‖² / (2h²))`.
    Gaussian { bandwidth: f64 },
    /// `g(u) = 1 / (1 + ‖u‖²/s)`.
    Cauchy { scale: f64 },
    #[serde(skip)]
    Custom(Arc<dyn TranslationProfile>),
}

impl Profile {
    fn value(&self, u: &[f64]) -> f64 {
        match self {
            Profile::Gaussian { bandwidth } => (-dot(u, u) / (2.0 * bandwidth * bandwidth)).exp(),
            Profile::Cauchy { scale } => 1.0 / (1.0 + dot(u, u) / scale),
            Profile::Custom(g) => g.value(u),
        }
    }

    fn neg_hessian_at_origin(&self, d: usize) -> Matrix {
        match self {
            Profile::Gaussian { bandwidth } => {
                Matrix::identity(d).scaled(1.0 / (bandwidth * bandwidth))
            }
            Profile::Cauchy { scale } => Matrix::identity(d).scaled(2.0 / scale),
            Profile::Custom(g) => g.neg_hessian_at_origin(d),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// Kernel on atoms `0..m` given by a PSD matrix.
    DiscreteMatrix { f: Matrix },
    /// `exp(−‖z − z′‖² / scale)`.
    Rbf { scale: f64 },
    /// `(⟨z, z′⟩ + a)^b`.
    Polynomial { a: f64, b: u32 },
    /// `Σ_k cos(z_k − z′_k) + offset`.
    CosineSum { offset: f64 },
    TranslationInvariant { profile: Profile },
    /// `g(⟨z, z′⟩)` with `g(t) = Σ_k c_k t^k`.
    InnerProductAnalytic { coefficients: Vec<f64> },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LmsError::Kernel(msg));
        match self {
            KernelSpec::DiscreteMatrix { f } => {
                if !f.is_square() || f.rows() == 0 {
                    return bad("kernel matrix must be square and non-empty".into());
                }
                if f.asymmetry() > 1e-12 * f.max_abs().max(1.0) {
                    return bad("kernel matrix is not symmetric".into());
                }
                let e = sym_eig(f)?;
                if *e.values.last().unwrap() < -1e-10 {
                    return bad(format!("kernel matrix has eigenvalue {}", e.values.last().unwrap()));
                }
            }
            KernelSpec::Rbf { scale } => {
                if !(*scale > 0.0) || !scale.is_finite() {
                    return bad(format!("rbf scale {scale}"));
                }
            }
            KernelSpec::Polynomial { a, b } => {
                if !(*a >= 0.0) || !a.is_finite() || *b < 1 {
                    return bad(format!("polynomial a={a}, b={b}"));
                }
            }
            KernelSpec::CosineSum { offset } => {
                if !offset.is_finite() {
                    return bad("cosine offset must be finite".into());
                }
            }
            KernelSpec::TranslationInvariant { profile } => match profile {
                Profile::Gaussian { bandwidth: s } | Profile::Cauchy { scale: s } => {
                    if !(*s > 0.0) || !s.is_finite() {
                        return bad("profile scale must be positive".into());
                    }
                }
                Profile::Custom(_) => {}
            },
            KernelSpec::InnerProductAnalytic { coefficients } => {
                if coefficients.is_empty()
                    || coefficients.iter().any(|c| !(*c >= 0.0) || !c.is_finite())
                {
                    return bad("power-series coefficients must be non-negative".into());
                }
            }
        }
        Ok(())
    }

    /// Checks that the kernel can be evaluated on points of `space`.
    pub fn check_domain(&self, space: &LatentSpace) -> Result<()> {
        match (self, space) {
            (KernelSpec::DiscreteMatrix { f }, LatentSpace::Discrete { m, .. }) => {
                if f.rows() != *m {
                    return Err(LmsError::Kernel(format!(
                        "{}x{} kernel matrix for {m} atoms",
                        f.rows(),
                        f.cols()
                    )));
                }
                Ok(())
            }
            (KernelSpec::DiscreteMatrix { .. }, _) | (_, LatentSpace::Discrete { .. }) => Err(
                LmsError::Kernel("discrete kernels pair only with discrete spaces".into()),
            ),
            (KernelSpec::CosineSum { offset }, s) => {
                let d = s.ambient_dim() as f64;
                if *offset < d {
                    return Err(LmsError::Kernel(format!(
                        "cosine offset {offset} below the {d} summed coordinates"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, KernelSpec::DiscreteMatrix { .. })
    }
}

fn series(coeffs: &[f64], t: f64, deriv: usize) -> f64 {
    let mut acc = 0.0;
    for (k, &c) in coeffs.iter().enumerate().rev() {
        if k < deriv {
            break;
        }
        let mut factor = c;
        for j in 0..deriv {
            factor *= (k - j) as f64;
        }
        acc += factor * t.powi((k - deriv) as i32);
    }
    acc
}

/// `f(z, z′)`. Symmetric in its arguments bit for bit.
pub fn kernel_eval(spec: &KernelSpec, z: LatentPoint<'_>, zp: LatentPoint<'_>) -> Result<f64> {
    match (spec, z, zp) {
        (KernelSpec::DiscreteMatrix { f }, LatentPoint::Atom(i), LatentPoint::Atom(j)) => {
            if i >= f.rows() || j >= f.rows() {
                return Err(LmsError::Kernel(format!(
                    "atom out of range for {} atoms",
                    f.rows()
                )));
            }
            // F is symmetric up to 1e-12; average to make the lookup exactly so.
            Ok(0.5 * (f[(i, j)] + f[(j, i)]))
        }
        (KernelSpec::DiscreteMatrix { .. }, _, _) => {
            Err(LmsError::Kernel("discrete kernel needs atom arguments".into()))
        }
        (_, LatentPoint::Coord(a), LatentPoint::Coord(b)) => {
            if a.len() != b.len() {
                return Err(LmsError::Shape(format!(
                    "kernel arguments of dimension {} and {}",
                    a.len(),
                    b.len()
                )));
            }
            Ok(coord_eval(spec, a, b))
        }
        _ => Err(LmsError::Kernel("continuous kernel needs coordinate arguments".into())),
    }
}

fn coord_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    match spec {
        KernelSpec::Rbf { scale } => (-sq_dist(a, b) / scale).exp(),
        KernelSpec::Polynomial { a: off, b: deg } => (dot(a, b) + off).powi(*deg as i32),
        KernelSpec::CosineSum { offset } => {
            a.iter().zip(b).map(|(x, y)| (x - y).cos()).sum::<f64>() + offset
        }
        KernelSpec::TranslationInvariant { profile } => {
            // g need not be even; symmetrise so f(z,z′) = f(z′,z).
            let u: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            let v: Vec<f64> = u.iter().map(|x| -x).collect();
            let (gu, gv) = (profile.value(&u), profile.value(&v));
            if gu == gv {
                gu
            } else {
                0.5 * (gu + gv)
            }
        }
        KernelSpec::InnerProductAnalytic { coefficients } => series(coefficients, dot(a, b), 0),
        KernelSpec::DiscreteMatrix { .. } => unreachable!("handled by kernel_eval"),
    }
}

/// Gram matrix `[f(Z_i, Z_j)]`.
pub fn gram(spec: &KernelSpec, sample: &LatentSample) -> Result<Matrix> {
    spec.check_domain(&sample.space)?;
    let n = sample.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| kernel_eval(spec, sample.point(i), sample.point(j)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut g = Matrix::zeros(n, n);
    for (i, r) in rows.into_iter().enumerate() {
        for (off, v) in r.into_iter().enumerate() {
            g[(i, i + off)] = v;
            g[(i + off, i)] = v;
        }
    }
    Ok(g)
}

/// `[f(A_i, B_j)]` between two samples.
pub fn cross_gram(spec: &KernelSpec, a: &LatentSample, b: &LatentSample) -> Result<Matrix> {
    spec.check_domain(&a.space)?;
    spec.check_domain(&b.space)?;
    let rows: Vec<Vec<f64>> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            (0..b.len())
                .map(|j| kernel_eval(spec, a.point(i), b.point(j)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Matrix::from_rows(&rows)
}

/// Number of eigenvalues above `rel_tol · λ_max`.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> Result<usize> {
    let e = sym_eig(m)?;
    let lmax = e.values.first().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return if lmax < 0.0 {
            Err(LmsError::Kernel("matrix is negative definite".into()))
        } else {
            Ok(0)
        };
    }
    let lmin = *e.values.last().unwrap();
    if lmin < -rel_tol * lmax {
        return Err(LmsError::Kernel(format!(
            "matrix is not positive semi-definite (eigenvalue {lmin:e})"
        )));
    }
    Ok(e.values.iter().filter(|&&v| v > rel_tol * lmax).count())
}

/// Empirical realisation of the Mercer feature map.
#[derive(Debug, Clone)]
pub enum FeatureMap {
    /// Row k is the feature vector of atom k.
    DiscreteAtoms { vectors: Matrix },
    Nystrom {
        spec: KernelSpec,
        anchors: LatentSample,
        /// Leading eigenvectors of `K/m` as columns.
        u: Matrix,
        /// Matching eigenvalues of `K/m`.
        values: Vec<f64>,
    },
}

impl FeatureMap {
    pub fn rank(&self) -> usize {
        match self {
            FeatureMap::DiscreteAtoms { vectors } => vectors.cols(),
            FeatureMap::Nystrom { values, .. } => values.len(),
        }
    }

    /// Eigenvalues `λ_k` of the kernel's integral operator estimated by the map.
    pub fn mercer_values(&self) -> Vec<f64> {
        match self {
            FeatureMap::DiscreteAtoms { vectors } => {
                (0..vectors.cols()).map(|_| f64::NAN).collect()
            }
            FeatureMap::Nystrom { values, .. } => values.clone(),
        }
    }

    pub fn map_point(&self, z: LatentPoint<'_>) -> Result<Vec<f64>> {
        match (self, z) {
            (FeatureMap::DiscreteAtoms { vectors }, LatentPoint::Atom(k)) => {
                if k >= vectors.rows() {
                    return Err(LmsError::Kernel(format!("atom {k} out of range")));
                }
                Ok(vectors.row(k).to_vec())
            }
            (FeatureMap::Nystrom { spec, anchors, u, values }, z) => {
                let m = anchors.len();
                let kz: Vec<f64> = (0..m)
                    .map(|i| kernel_eval(spec, anchors.point(i), z))
                    .collect::<Result<_>>()?;
                let sm = (m as f64).sqrt();
                Ok((0..values.len())
                    .map(|k| {
                        let s: f64 = (0..m).map(|i| u[(i, k)] * kz[i]).sum();
                        s / (sm * values[k].sqrt())
                    })
                    .collect())
            }
            _ => Err(LmsError::Kernel("point type does not match the feature map".into())),
        }
    }

    /// Feature vectors of every sample point, one per row.
    pub fn map_sample(&self, sample: &LatentSample) -> Result<Matrix> {
        match self {
            FeatureMap::DiscreteAtoms { vectors } => {
                let atoms = sample
                    .atoms()
                    .ok_or_else(|| LmsError::Kernel("discrete map needs atoms".into()))?;
                if atoms.iter().any(|&a| a >= vectors.rows()) {
                    return Err(LmsError::Kernel("atom out of range".into()));
                }
                Ok(vectors.select_rows(atoms))
            }
            FeatureMap::Nystrom { spec, anchors, u, values } => {
                let kz = cross_gram(spec, sample, anchors)?;
                let m = anchors.len() as f64;
                let proj = kz.matmul(u)?;
                let scale: Vec<f64> = values.iter().map(|v| 1.0 / (m.sqrt() * v.sqrt())).collect();
                Ok(Matrix::from_fn(proj.rows(), proj.cols(), |i, k| proj[(i, k)] * scale[k]))
            }
        }
    }
}

/// Discrete feature map from atom probabilities and a kernel matrix.
pub fn discrete_features(f: &Matrix, probs: &[f64], r: usize) -> Result<FeatureMap> {
    let m = f.rows();
    if probs.len() != m || !f.is_square() {
        return Err(LmsError::Shape("kernel matrix and probabilities disagree".into()));
    }
    if probs.iter().any(|&p| !(p > 0.0)) {
        return Err(LmsError::Kernel("atom probabilities must be positive".into()));
    }
    let sq: Vec<f64> = probs.iter().map(|p| p.sqrt()).collect();
    let weighted = Matrix::from_fn(m, m, |i, j| sq[i] * 0.5 * (f[(i, j)] + f[(j, i)]) * sq[j]);
    let rank = numerical_rank(&weighted, RANK_TOL)?;
    if r == 0 || r > rank {
        return Err(LmsError::RankDeficient { rank, requested: r });
    }
    let e = sym_eig_top(&weighted, r)?;
    let vectors = Matrix::from_fn(m, r, |k, j| e.vectors[(k, j)] * e.values[j].sqrt() / sq[k]);
    Ok(FeatureMap::DiscreteAtoms { vectors })
}

/// Nyström feature map from an anchor sample.
pub fn nystrom_features(spec: &KernelSpec, anchors: &LatentSample, r: usize) -> Result<FeatureMap> {
    let m = anchors.len();
    let k = gram(spec, anchors)?.scaled(1.0 / m as f64);
    let rank = numerical_rank(&k, RANK_TOL)?;
    if r == 0 || r > rank {
        return Err(LmsError::RankDeficient { rank, requested: r });
    }
    let e = sym_eig_top(&k, r)?;
    Ok(FeatureMap::Nystrom {
        spec: spec.clone(),
        anchors: anchors.clone(),
        u: e.vectors,
        values: e.values,
    })
}

/// Feature map for `spec` on `support`: exact on atoms for discrete kernels,
/// Nyström on the given anchors otherwise.
pub fn mercer_features(spec: &KernelSpec, support: &LatentSample, r: usize) -> Result<FeatureMap> {
    spec.validate()?;
    spec.check_domain(&support.space)?;
    match spec {
        KernelSpec::DiscreteMatrix { f } => {
            let probs = support.space.probs().expect("discrete space");
            discrete_features(f, &probs, r)
        }
        _ => nystrom_features(spec, support, r),
    }
}

/// `H_ξ` with entries `∂²f/∂z_i∂z′_j` at `(ξ, ξ)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricTensor {
    pub at: Vec<f64>,
    pub h: Matrix,
}

impl MetricTensor {
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*sym_eig(&self.h)?.values.last().unwrap())
    }

    pub fn is_positive_definite(&self) -> Result<bool> {
        Ok(self.min_eigenvalue()? > 0.0)
    }

    /// `⟨v, H v⟩^{1/2}`.
    pub fn speed(&self, v: &[f64]) -> f64 {
        dot(v, &self.h.matvec(v)).max(0.0).sqrt()
    }
}

pub fn riemannian_metric(spec: &KernelSpec, xi: &[f64]) -> Result<MetricTensor> {
    let d = xi.len();
    if d == 0 {
        return Err(LmsError::InvalidArgument("metric at an empty point".into()));
    }
    let h = match spec {
        KernelSpec::DiscreteMatrix { .. } => {
            return Err(LmsError::Kernel("discrete kernels have no metric".into()))
        }
        KernelSpec::Rbf { scale } => Matrix::identity(d).scaled(2.0 / scale),
        KernelSpec::Polynomial { a, b } => {
            let t = dot(xi, xi) + a;
            let b = *b as f64;
            let c1 = b * t.powf(b - 1.0);
            let c2 = if b >= 2.0 { b * (b - 1.0) * t.powf(b - 2.0) } else { 0.0 };
            Matrix::from_fn(d, d, |i, j| c1 * f64::from(u8::from(i == j)) + c2 * xi[i] * xi[j])
        }
        KernelSpec::CosineSum { .. } => Matrix::identity(d),
        KernelSpec::TranslationInvariant { profile } => profile.neg_hessian_at_origin(d),
        KernelSpec::InnerProductAnalytic { coefficients } => {
            let t = dot(xi, xi);
            let g1 = series(coefficients, t, 1);
            let g2 = series(coefficients, t, 2);
            Matrix::from_fn(d, d, |i, j| g1 * f64::from(u8::from(i == j)) + g2 * xi[i] * xi[j])
        }
    };
    Ok(MetricTensor { at: xi.to_vec(), h })
}

/// True when no two rows of `F` agree within `tol` in the max norm.
pub fn injectivity_check_discrete(f: &Matrix, tol: f64) -> bool {
    let m = f.rows();
    for i in 0..m {
        for j in (i + 1)..m {
            let diff = f
                .row(i)
                .iter()
                .zip(f.row(j))
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            if diff <= tol {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::{sample, Region};
    use crate::rng::stream_rng;
    use rand::Rng;

    fn plane() -> LatentSpace {
        LatentSpace::PlanarRegion {
            region: Region::Polygon {
                vertices: vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]],
                holes: vec![],
            },
        }
    }

    fn c(v: &[f64]) -> LatentPoint<'_> {
        LatentPoint::Coord(v)
    }

    #[test]
    fn eval_examples() {
        let rbf = KernelSpec::Rbf { scale: 1.0 };
        assert_eq!(kernel_eval(&rbf, c(&[0.3, 2.0]), c(&[0.3, 2.0])).unwrap(), 1.0);
        let poly = KernelSpec::Polynomial { a: 1.0, b: 2 };
        assert_eq!(kernel_eval(&poly, c(&[1.0, 0.0]), c(&[0.0, 1.0])).unwrap(), 1.0);
        let cos = KernelSpec::CosineSum { offset: 2.0 };
        assert_eq!(kernel_eval(&cos, c(&[0.3, -1.1]), c(&[0.3, -1.1])).unwrap(), 4.0);
        assert!(kernel_eval(&rbf, c(&[1.0]), c(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn discrete_gram_lookup() {
        let f = Matrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]).unwrap();
        let spec = KernelSpec::DiscreteMatrix { f: f.clone() };
        let s = LatentSample::from_atoms(LatentSpace::discrete_uniform(2), vec![0, 0, 1]).unwrap();
        let g = gram(&spec, &s).unwrap();
        let expected =
            Matrix::from_rows(&[[2.0, 2.0, 0.5], [2.0, 2.0, 0.5], [0.5, 0.5, 1.0]]).unwrap();
        assert_eq!(g, expected);
        assert!(kernel_eval(&spec, LatentPoint::Atom(0), LatentPoint::Atom(5)).is_err());
    }

    #[test]
    fn single_point_gram() {
        let s = LatentSample::from_coords(plane(), Matrix::from_rows(&[[0.2, 0.4]]).unwrap())
            .unwrap();
        let g = gram(&KernelSpec::Polynomial { a: 1.0, b: 2 }, &s).unwrap();
        assert_eq!(g.shape(), (1, 1));
        assert!((g[(0, 0)] - 1.2f64.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn rbf_gram_psd_and_full_rank() {
        let s = sample(&plane(), 20, 3).unwrap();
        let g = gram(&KernelSpec::Rbf { scale: 1.0 }, &s).unwrap();
        let e = sym_eig(&g).unwrap();
        assert!(*e.values.last().unwrap() >= -1e-10);
        let s12 = sample(&plane(), 12, 4).unwrap();
        let g12 = gram(&KernelSpec::Rbf { scale: 1.0 }, &s12).unwrap();
        assert_eq!(numerical_rank(&g12, RANK_TOL).unwrap(), 12);
    }

    #[test]
    fn finite_kernel_ranks() {
        let s = sample(&plane(), 12, 5).unwrap();
        let poly = gram(&KernelSpec::Polynomial { a: 1.0, b: 2 }, &s).unwrap();
        assert_eq!(numerical_rank(&poly, RANK_TOL).unwrap(), 6);
        let cos = gram(&KernelSpec::CosineSum { offset: 2.0 }, &s).unwrap();
        assert_eq!(numerical_rank(&cos, RANK_TOL).unwrap(), 5);
    }

    #[test]
    fn discrete_features_reconstruct() {
        let f = Matrix::from_rows(&[[2.0, 0.5, 0.2], [0.5, 1.5, 0.3], [0.2, 0.3, 1.0]]).unwrap();
        let fm = discrete_features(&f, &[1.0 / 3.0; 3], 3).unwrap();
        let FeatureMap::DiscreteAtoms { vectors } = &fm else { panic!() };
        let back = vectors.row_gram();
        assert!(back.sub(&f).unwrap().max_abs() <= 1e-10);

        let fm = discrete_features(&Matrix::identity(2), &[0.5, 0.5], 2).unwrap();
        let FeatureMap::DiscreteAtoms { vectors } = &fm else { panic!() };
        let g = vectors.row_gram();
        assert!(g.sub(&Matrix::identity(2)).unwrap().max_abs() < 1e-12);
        assert!(discrete_features(&Matrix::identity(2), &[0.5, 0.5], 3).is_err());
    }

    #[test]
    fn nystrom_polynomial_holds_out() {
        let spec = KernelSpec::Polynomial { a: 1.0, b: 2 };
        let anchors = sample(&plane(), 200, 6).unwrap();
        let fm = mercer_features(&spec, &anchors, 6).unwrap();
        let held = sample(&plane(), 30, 7).unwrap();
        let phi = fm.map_sample(&held).unwrap();
        let approx = phi.row_gram();
        let exact = gram(&spec, &held).unwrap();
        let rel = approx.sub(&exact).unwrap().max_abs() / exact.max_abs();
        assert!(rel <= 1e-6, "{rel}");
        // Single-point path agrees with the batched one.
        let p0 = fm.map_point(held.point(0)).unwrap();
        for k in 0..6 {
            assert!((p0[k] - phi[(0, k)]).abs() < 1e-12);
        }
        assert!(mercer_features(&spec, &anchors, 7).is_err());
    }

    #[test]
    fn nystrom_distance_identity_on_anchors() {
        let spec = KernelSpec::CosineSum { offset: 2.0 };
        let anchors = sample(&plane(), 50, 8).unwrap();
        let fm = mercer_features(&spec, &anchors, 5).unwrap();
        let phi = fm.map_sample(&anchors).unwrap();
        let k = gram(&spec, &anchors).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                let d2 = sq_dist(phi.row(i), phi.row(j));
                let via_f = k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)];
                assert!((d2 - via_f).abs() <= 1e-8 * k.max_abs());
            }
        }
    }

    #[test]
    fn metric_examples() {
        let h = riemannian_metric(&KernelSpec::Rbf { scale: 1.0 }, &[0.4, -0.2, 1.0]).unwrap();
        assert_eq!(h.h, Matrix::identity(3).scaled(2.0));
        let h = riemannian_metric(&KernelSpec::Polynomial { a: 1.0, b: 2 }, &[0.0, 0.0]).unwrap();
        assert_eq!(h.h, Matrix::identity(2).scaled(2.0));
        let ti = KernelSpec::TranslationInvariant {
            profile: Profile::Gaussian { bandwidth: 1.0 },
        };
        let h = riemannian_metric(&ti, &[3.0, 1.0]).unwrap();
        assert_eq!(h.h, Matrix::identity(2));
        assert!(riemannian_metric(&KernelSpec::DiscreteMatrix { f: Matrix::identity(2) }, &[0.0])
            .is_err());
    }

    #[test]
    fn inner_product_series_metric() {
        // g(t) = 1 + t + t²/2 truncated exp.
        let spec = KernelSpec::InnerProductAnalytic {
            coefficients: vec![1.0, 1.0, 0.5],
        };
        let xi = [0.3, -0.6];
        let h = riemannian_metric(&spec, &xi).unwrap();
        let t = 0.45;
        assert!((h.h[(0, 0)] - ((1.0 + t) + 0.09)).abs() < 1e-12);
        assert!((h.h[(0, 1)] - (-0.18)).abs() < 1e-12);
        assert!(h.is_positive_definite().unwrap());
    }

    #[test]
    fn rbf_curve_length_is_root_two_euclidean() {
        let spec = KernelSpec::Rbf { scale: 1.0 };
        let (a, b) = ([0.1, 0.2, -0.3], [1.0, -0.5, 0.4]);
        let steps = 1000;
        let v: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
        let mut len = 0.0;
        for s in 0..steps {
            let t = (s as f64 + 0.5) / steps as f64;
            let xi: Vec<f64> = a.iter().zip(&v).map(|(x, d)| x + t * d).collect();
            len += riemannian_metric(&spec, &xi).unwrap().speed(&v) / steps as f64;
        }
        let eucl = crate::linalg::norm(&v);
        assert!((len / eucl - 2f64.sqrt()).abs() <= 1e-4 * 2f64.sqrt());
    }

    #[test]
    fn injectivity() {
        assert!(injectivity_check_discrete(&Matrix::identity(3), 1e-9));
        assert!(!injectivity_check_discrete(&Matrix::from_fn(3, 3, |_, _| 1.0), 1e-9));
        let mut rng = stream_rng(11, 0);
        let a = Matrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let f = a.row_gram();
        assert_eq!(numerical_rank(&f, RANK_TOL).unwrap(), 4);
        assert!(injectivity_check_discrete(&f, 1e-9));
    }

    #[test]
    fn discrete_atoms_distinct() {
        let mut rng = stream_rng(12, 0);
        let a = Matrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let f = a.row_gram();
        let fm = discrete_features(&f, &[0.2; 5], 5).unwrap();
        let FeatureMap::DiscreteAtoms { vectors } = &fm else { panic!() };
        for i in 0..5 {
            for j in (i + 1)..5 {
                assert!(sq_dist(vectors.row(i), vectors.row(j)) > 0.0);
            }
        }
    }

    #[test]
    fn cosine_offset_guard_and_serde() {
        let spec: KernelSpec =
            serde_json::from_str(r#"{"family":"cosine_sum","offset":1.0}"#).unwrap();
        let s = sample(&plane(), 3, 1).unwrap();
        assert!(gram(&spec, &s).is_err());
        let spec: KernelSpec = serde_json::from_str(
            r#"{"family":"translation_invariant","profile":{"kind":"cauchy","scale":2.0}}"#,
        )
        .unwrap();
        assert!(spec.validate().is_ok());
    }
}
