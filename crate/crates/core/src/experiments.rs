//! Desk-scale recipes for the figure experiments: fixed latent spaces and
//! kernels, plus the runners shared by the command-line tool and the
//! acceptance tests.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimsel::{elbow_select, scree, wasserstein_dimension_select, DimSelectReport};
use crate::embed::{align, pc_scores, AlignmentReport, Embedding};
use crate::error::{LmsError, Result};
use crate::geometry::{graph_geodesics, isometry_slope, neighbor_graph, Fallback, GraphMode};
use crate::kernels::KernelSpec;
use crate::knn::{error_curve, CurveOptions, ErrorCurve, Targets};
use crate::latent::{torus_angles, LatentSample, LatentSpace, Region};
use crate::linalg::Matrix;
use crate::sim::{feature_targets, simulate, SimConfig};
use crate::tda::{bottleneck, count_features, rips_persistence, PersistenceDiagram};

/// Torus radii, small enough that 400 uniform points resolve both holes at
/// a persistence cutoff of 0.2.
pub const TORUS_MAJOR: f64 = 0.36;
pub const TORUS_MINOR: f64 = 0.18;

/// Max death scale for the torus diagrams.
pub const TORUS_MAX_SCALE: f64 = 1.5;

pub fn torus_space() -> LatentSpace {
    LatentSpace::TorusR3 {
        major_radius: TORUS_MAJOR,
        minor_radius: TORUS_MINOR,
    }
}

/// Torus with the RBF kernel `exp(−‖z − z′‖²)`.
pub fn torus_config(n: usize, p: usize, sigma: f64, seed: u64) -> SimConfig {
    SimConfig {
        n,
        p,
        sigma,
        kernel: KernelSpec::Rbf { scale: 1.0 },
        space: torus_space(),
        noise: Default::default(),
        seed,
    }
}

/// `F_ab = ρ^{|a−b|}`, positive definite for `|ρ| < 1`.
pub fn ar1_matrix(m: usize, rho: f64) -> Matrix {
    Matrix::from_fn(m, m, |a, b| rho.powi((a as i32 - b as i32).abs()))
}

/// Three-component mixture with a full-rank covariance.
pub fn mixture3_config(n: usize, p: usize, sigma: f64, seed: u64) -> SimConfig {
    SimConfig {
        n,
        p,
        sigma,
        kernel: KernelSpec::DiscreteMatrix {
            f: ar1_matrix(3, 0.5),
        },
        space: LatentSpace::discrete_uniform(3),
        noise: Default::default(),
        seed,
    }
}

/// Ten-component mixture used for classification, with independent
/// unit-variance component values so every component needs its own axis.
pub fn mixture10_config(n: usize, p: usize, sigma: f64, seed: u64) -> SimConfig {
    SimConfig {
        n,
        p,
        sigma,
        kernel: KernelSpec::DiscreteMatrix {
            f: Matrix::identity(10),
        },
        space: LatentSpace::discrete_uniform(10),
        noise: Default::default(),
        seed,
    }
}

fn square(cx: f64, cy: f64, h: f64) -> Vec<[f64; 2]> {
    vec![[cx - h, cy - h], [cx + h, cy - h], [cx + h, cy + h], [cx - h, cy + h]]
}

/// Square `[−1, 1]²` with eight square holes around the centre.
pub fn holed_square() -> Region {
    let mut holes = Vec::new();
    for &cx in &[-0.6, 0.0, 0.6] {
        for &cy in &[-0.6, 0.0, 0.6] {
            if cx != 0.0 || cy != 0.0 {
                holes.push(square(cx, cy, 0.15));
            }
        }
    }
    Region::Polygon {
        vertices: square(0.0, 0.0, 1.0),
        holes,
    }
}

/// A letter Z spanning `[−1.5, 1.5]²`.
pub fn z_shape() -> Region {
    Region::Polygon {
        vertices: vec![
            [-1.5, 1.5],
            [1.5, 1.5],
            [1.5, 0.9],
            [-0.6, -0.9],
            [1.5, -0.9],
            [1.5, -1.5],
            [-1.5, -1.5],
            [-1.5, -0.9],
            [0.6, 0.9],
            [-1.5, 0.9],
        ],
        holes: vec![],
    }
}

/// The four dimension-selection configurations, numbered 1 to 4:
/// a six-atom mixture, a quadratic kernel on a holed square, a cosine-sum
/// kernel on a Z, and an RBF kernel on an annulus.
pub fn selection_config(config: usize, n: usize, p: usize, sigma: f64, seed: u64) -> Result<SimConfig> {
    let (kernel, space) = match config {
        1 => (
            KernelSpec::DiscreteMatrix { f: ar1_matrix(6, 0.5) },
            LatentSpace::discrete_uniform(6),
        ),
        2 => (
            KernelSpec::Polynomial { a: 1.0, b: 2 },
            LatentSpace::PlanarRegion { region: holed_square() },
        ),
        3 => (
            KernelSpec::CosineSum { offset: 2.0 },
            LatentSpace::PlanarRegion { region: z_shape() },
        ),
        4 => (
            KernelSpec::Rbf { scale: 2.0 },
            LatentSpace::PlanarRegion {
                region: Region::Annulus {
                    center: [0.0, 0.0],
                    inner_radius: 0.5,
                    outer_radius: 1.5,
                },
            },
        ),
        _ => return Err(LmsError::InvalidArgument(format!("no selection config {config}"))),
    };
    Ok(SimConfig {
        n,
        p,
        sigma,
        kernel,
        space,
        noise: Default::default(),
        seed,
    })
}

/// True `(β0, β1)` of each selection configuration's latent space.
pub fn selection_truth(config: usize) -> (usize, usize) {
    match config {
        1 => (6, 0),
        2 => (1, 8),
        3 => (1, 0),
        _ => (1, 1),
    }
}

/// Concentration errors of the rank-`r` scores against the exact features.
pub fn concentration_error(config: &SimConfig, r: usize) -> Result<AlignmentReport> {
    let out = simulate(config)?;
    let emb = pc_scores(&out.y, r, false)?;
    let targets = feature_targets(&config.kernel, &out.z, r)?;
    align(&emb, &targets)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorCell {
    pub n: usize,
    pub p: usize,
    pub mean_pairwise_error: f64,
    pub mean_uniform_error: f64,
    pub replicates: usize,
}

/// Mean three-component mixture errors over seeds `0..replicates` per cell.
pub fn mixture_error_grid(
    ns: &[usize],
    ps: &[usize],
    sigma: f64,
    replicates: usize,
    base_seed: u64,
) -> Result<Vec<ErrorCell>> {
    let cells: Vec<(usize, usize)> = ns.iter().flat_map(|&n| ps.iter().map(move |&p| (n, p))).collect();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..replicates as u64).map(move |s| (c, s)))
        .collect();
    let errs: Vec<AlignmentReport> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let (n, p) = cells[c];
            concentration_error(&mixture3_config(n, p, sigma, base_seed + s), 3)
        })
        .collect::<Result<_>>()?;
    Ok(cells
        .iter()
        .enumerate()
        .map(|(c, &(n, p))| {
            let mine: Vec<&AlignmentReport> = jobs
                .iter()
                .zip(&errs)
                .filter(|((jc, _), _)| *jc == c)
                .map(|(_, e)| e)
                .collect();
            let k = mine.len() as f64;
            ErrorCell {
                n,
                p,
                mean_pairwise_error: mine.iter().map(|e| e.pairwise_error).sum::<f64>() / k,
                mean_uniform_error: mine.iter().map(|e| e.uniform_error).sum::<f64>() / k,
                replicates,
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct MixtureScatter {
    pub n: usize,
    pub p: usize,
    /// Normalised scores rotated onto the feature coordinates.
    pub aligned_scores: Matrix,
    pub atoms: Vec<usize>,
    /// Feature vector of each atom, one row per atom.
    pub phi: Matrix,
}

pub fn mixture_scatter(n: usize, p: usize, sigma: f64, seed: u64) -> Result<MixtureScatter> {
    let cfg = mixture3_config(n, p, sigma, seed);
    let out = simulate(&cfg)?;
    let emb = pc_scores(&out.y, 3, false)?;
    let targets = feature_targets(&cfg.kernel, &out.z, 3)?;
    let rep = align(&emb, &targets)?;
    let atoms = out.z.atoms().unwrap_or_default().to_vec();
    let phi = feature_targets(&cfg.kernel, &out.z.atom_support(), 3)?;
    Ok(MixtureScatter {
        n,
        p,
        aligned_scores: emb.normalized_scores().matmul(&rep.q)?,
        atoms,
        phi,
    })
}

#[derive(Debug, Clone)]
pub struct TorusRun {
    pub z: LatentSample,
    pub y: Matrix,
    pub embedding: Embedding,
}

impl TorusRun {
    pub fn latent(&self) -> &Matrix {
        self.z.coords().expect("torus samples carry coordinates")
    }

    /// Leading `r` columns of the normalised scores.
    pub fn scores(&self, r: usize) -> Matrix {
        self.embedding.normalized_scores().leading_columns(r)
    }
}

pub fn torus_run(n: usize, p: usize, sigma: f64, seed: u64, r: usize) -> Result<TorusRun> {
    let out = simulate(&torus_config(n, p, sigma, seed))?;
    let embedding = pc_scores(&out.y, r, false)?;
    Ok(TorusRun {
        z: out.z,
        y: out.y,
        embedding,
    })
}

#[derive(Debug, Clone)]
pub struct LabelledDiagram {
    pub label: String,
    pub diagram: PersistenceDiagram,
    pub counts: (usize, usize),
}

/// Diagrams of the latent points and of the leading `dims` score columns.
pub fn torus_topology(run: &TorusRun, dims: &[usize], max_scale: f64, cutoff: f64) -> Result<Vec<LabelledDiagram>> {
    let mut clouds = vec![("latent".to_string(), run.latent().clone())];
    for &d in dims {
        clouds.push((format!("scores_r{d}"), run.scores(d)));
    }
    clouds
        .into_par_iter()
        .map(|(label, pts)| {
            let diagram = rips_persistence(&pts, max_scale, 1)?;
            let counts = count_features(&diagram, cutoff);
            Ok(LabelledDiagram { label, diagram, counts })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GeodesicComparison {
    pub slope: f64,
    pub latent: Matrix,
    pub scores: Matrix,
}

/// kNN-graph geodesics among latent points against those among scores.
pub fn geodesic_comparison(latent: &Matrix, scores: &Matrix, mode: GraphMode) -> Result<GeodesicComparison> {
    let gz = neighbor_graph(latent, mode)?;
    let gs = neighbor_graph(scores, mode)?;
    let dz = graph_geodesics(&gz, latent, Fallback::Euclidean)?;
    let ds = graph_geodesics(&gs, scores, Fallback::Euclidean)?;
    Ok(GeodesicComparison {
        slope: isometry_slope(&dz, &ds)?,
        latent: dz,
        scores: ds,
    })
}

/// kNN regression of azimuth and elevation from torus scores.
pub fn torus_regression(n: usize, p: usize, sigma: f64, seed: u64, opts: &CurveOptions) -> Result<ErrorCurve> {
    let out = simulate(&torus_config(n, p, sigma, seed))?;
    let (az, el) = torus_angles(&out.z)?;
    let values = Matrix::from_fn(n, 2, |i, c| if c == 0 { az[i] } else { el[i] });
    let targets = Targets::Regression {
        values,
        names: vec!["azimuth".into(), "elevation".into()],
    };
    error_curve(&out.y, &targets, opts)
}

/// kNN classification of the mixture component from the scores.
pub fn mixture_classification(n: usize, p: usize, sigma: f64, seed: u64, opts: &CurveOptions) -> Result<ErrorCurve> {
    let out = simulate(&mixture10_config(n, p, sigma, seed))?;
    let labels = out.z.atoms().unwrap_or_default().to_vec();
    error_curve(&out.y, &Targets::Classification { labels }, opts)
}

#[derive(Debug, Clone)]
pub struct SelectionRun {
    pub config: usize,
    pub z: LatentSample,
    pub y: Matrix,
    pub wasserstein: DimSelectReport,
    pub elbow: usize,
}

/// Simulates one selection configuration and runs both selectors.
pub fn selection_run(cfg: &SimConfig, config: usize, r_max: usize) -> Result<SelectionRun> {
    let out = simulate(cfg)?;
    let wasserstein = wasserstein_dimension_select(&out.y, r_max, cfg.seed)?;
    let elbow = elbow_select(&scree(&out.y)?)?.selected;
    Ok(SelectionRun {
        config,
        z: out.z,
        y: out.y,
        wasserstein,
        elbow,
    })
}

/// Latent coordinates for geometric comparisons; atoms sit at the corners of
/// a unit simplex so distinct atoms are at distance √2.
pub fn latent_points(z: &LatentSample) -> Matrix {
    match z.coords() {
        Some(c) => c.clone(),
        None => {
            let atoms = z.atoms().unwrap_or_default();
            let m = atoms.iter().max().map_or(1, |a| a + 1);
            Matrix::from_fn(atoms.len(), m, |i, k| (atoms[i] == k) as u8 as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RecoveryPoint {
    pub r: usize,
    /// Mean squared difference of the two geodesic distance matrices.
    pub geodesic_mse: f64,
    pub bottleneck_h0: f64,
    pub bottleneck_h1: f64,
}

/// Geodesic and persistence recovery of the latent points by the leading
/// `r` score columns, for each `r` in the grid. Geodesics use the
/// `quantile`-quantile ε-graph with Euclidean fallback.
pub fn recovery_curve(
    latent: &Matrix,
    scores: &Matrix,
    r_grid: &[usize],
    quantile: f64,
    max_scale: f64,
) -> Result<Vec<RecoveryPoint>> {
    let mode = GraphMode::EpsQuantile { q: quantile };
    let gz = neighbor_graph(latent, mode)?;
    let dz = graph_geodesics(&gz, latent, Fallback::Euclidean)?;
    let base = rips_persistence(latent, max_scale, 1)?;
    r_grid
        .par_iter()
        .map(|&r| {
            if r == 0 || r > scores.cols() {
                return Err(LmsError::InvalidArgument(format!("r={r} outside the scores")));
            }
            let s = scores.leading_columns(r);
            let gs = neighbor_graph(&s, mode)?;
            let ds = graph_geodesics(&gs, &s, Fallback::Euclidean)?;
            let n = dz.rows();
            let mse = dz
                .as_slice()
                .iter()
                .zip(ds.as_slice())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / (n * n) as f64;
            let diag = rips_persistence(&s, max_scale, 1)?;
            Ok(RecoveryPoint {
                r,
                geodesic_mse: mse,
                bottleneck_h0: bottleneck(&base, &diag, 0),
                bottleneck_h1: bottleneck(&base, &diag, 1),
            })
        })
        .collect()
}
