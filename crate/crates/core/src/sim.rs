//! Simulation of `Y_ij = X_j(Z_i) + σE_ij` with Gaussian-process fields.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LmsError, Result};
use crate::kernels::{gram, mercer_features, numerical_rank, KernelSpec, RANK_TOL};
use crate::latent::{sample, LatentSample, LatentSpace};
use crate::linalg::{cholesky_jitter, Matrix};
use crate::rng::{kind_rng, StreamKind};

/// Field-sampling jitter relative to the mean Gram diagonal.
pub const FIELD_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub sigma: f64,
    pub kernel: KernelSpec,
    pub space: LatentSpace,
    #[serde(default)]
    pub noise: NoiseKind,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(LmsError::InvalidArgument(format!(
                "n={} and p={} must both be positive",
                self.n, self.p
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(LmsError::InvalidArgument(format!("sigma {}", self.sigma)));
        }
        self.space.validate()?;
        self.kernel.validate()?;
        self.kernel.check_domain(&self.space)
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub y: Matrix,
    pub z: LatentSample,
    /// Feature-map values at `Z` when the kernel has finite rank.
    pub phi_z: Option<Matrix>,
    /// Noise-free fields `X_j(Z_i)`.
    pub x: Option<Matrix>,
    /// Diagonal jitter added before factorising the field covariance.
    pub jitter: f64,
}

/// Draws `Z` from the configured space and simulates the data matrix.
pub fn simulate(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let z = sample(&config.space, config.n, config.seed)?;
    simulate_at(config, z, true)
}

/// Simulates the data matrix at given latent points. `config.n` is ignored.
pub fn simulate_at(config: &SimConfig, z: LatentSample, retain_fields: bool) -> Result<SimOutput> {
    let mut cfg = config.clone();
    cfg.n = z.len();
    cfg.space = z.space.clone();
    cfg.validate()?;
    let (n, p) = (z.len(), config.p);

    // Field values are drawn at the distinct support points: the atoms for a
    // discrete kernel (then broadcast), the sample itself otherwise.
    let (cov, index): (Matrix, Vec<usize>) = match &config.kernel {
        KernelSpec::DiscreteMatrix { f } => {
            let f = Matrix::from_fn(f.rows(), f.cols(), |i, j| 0.5 * (f[(i, j)] + f[(j, i)]));
            (f, z.atoms().expect("discrete sample").to_vec())
        }
        spec => (gram(spec, &z)?, (0..n).collect()),
    };
    let support = cov.rows();
    let mean_diag = cov.trace() / support as f64;
    let chol = cholesky_jitter(&cov, FIELD_JITTER * mean_diag.max(0.0))?;
    let l = &chol.l;
    let seed = config.seed;
    let sigma = config.sigma;

    let columns: Vec<(Vec<f64>, Vec<f64>)> = (0..p)
        .into_par_iter()
        .map(|j| {
            let mut rng = kind_rng(seed, StreamKind::Field, j as u64);
            let g: Vec<f64> = (0..support).map(|_| rng.sample(StandardNormal)).collect();
            let at_support: Vec<f64> = (0..support)
                .map(|i| l.row(i)[..=i].iter().zip(&g).map(|(a, b)| a * b).sum())
                .collect();
            let x: Vec<f64> = index.iter().map(|&k| at_support[k]).collect();
            let mut rng = kind_rng(seed, StreamKind::Noise, j as u64);
            let y: Vec<f64> = x
                .iter()
                .map(|&v| {
                    let e: f64 = rng.sample(StandardNormal);
                    v + sigma * e
                })
                .collect();
            (x, y)
        })
        .collect();

    let mut y = Matrix::zeros(n, p);
    let mut x = if retain_fields { Some(Matrix::zeros(n, p)) } else { None };
    for (j, (xc, yc)) in columns.into_iter().enumerate() {
        for i in 0..n {
            y[(i, j)] = yc[i];
            if let Some(x) = x.as_mut() {
                x[(i, j)] = xc[i];
            }
        }
    }
    let phi_z = finite_rank_features(&config.kernel, &z)?;
    Ok(SimOutput {
        y,
        z,
        phi_z,
        x,
        jitter: chol.jitter,
    })
}

fn finite_rank_features(spec: &KernelSpec, z: &LatentSample) -> Result<Option<Matrix>> {
    match spec {
        KernelSpec::DiscreteMatrix { f } => {
            let rank = numerical_rank(f, RANK_TOL)?;
            let fm = mercer_features(spec, &z.atom_support(), rank)?;
            Ok(Some(fm.map_sample(z)?))
        }
        KernelSpec::Polynomial { .. } | KernelSpec::CosineSum { .. } => {
            let k = gram(spec, z)?;
            let rank = numerical_rank(&k, RANK_TOL)?;
            if rank == 0 {
                return Ok(None);
            }
            let fm = mercer_features(spec, z, rank)?;
            Ok(Some(fm.map_sample(z)?))
        }
        _ => Ok(None),
    }
}

/// Feature-map values at the sample, truncated to `r` coordinates: exact
/// atoms for discrete kernels, the sample's own Gram eigensystem otherwise.
pub fn feature_targets(spec: &KernelSpec, z: &LatentSample, r: usize) -> Result<Matrix> {
    let support = match spec {
        KernelSpec::DiscreteMatrix { .. } => z.atom_support(),
        _ => z.clone(),
    };
    mercer_features(spec, &support, r)?.map_sample(z)
}

/// `p⁻¹E[YYᵀ | Z] = K + σ²I`.
pub fn conditional_gram_expectation(z: &LatentSample, kernel: &KernelSpec, sigma: f64) -> Result<Matrix> {
    let mut k = gram(kernel, z)?;
    k.add_diagonal(sigma * sigma);
    Ok(k)
}
