//! Python bindings. Matrices cross the boundary as lists of rows; kernels and
//! simulation configs as JSON strings in the same format the CLI reads.

use lms_core::dimsel::{default_r_max, elbow_select, wasserstein_dimension_select};
use lms_core::embed::{align, pc_scores, Embedding as CoreEmbedding};
use lms_core::geometry::{graph_geodesics, isometry_slope, neighbor_graph, Fallback, GraphMode};
use lms_core::kernels::{riemannian_metric, KernelSpec};
use lms_core::knn::{error_curve, CurveOptions, Targets};
use lms_core::latent::LatentPoints;
use lms_core::sim::{simulate as core_simulate, SimConfig};
use lms_core::tda::{
    bottleneck_points, count_features, rips_persistence_capped, PersistenceDiagram, DEFAULT_H1_CAP,
};
use lms_core::transport::{wasserstein1 as core_w1, WeightedCloud};
use lms_core::{experiments, LmsError, Matrix};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

pyo3::create_exception!(lms, NumericalError, PyRuntimeError, "A numerical routine failed.");

fn to_py(e: LmsError) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("empty matrix"));
    }
    Matrix::from_rows(&rows).map_err(to_py)
}

fn from_json<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> PyResult<T> {
    serde_json::from_str(s).map_err(|e| PyValueError::new_err(format!("bad {what}: {e}")))
}

/// Output of one simulation.
#[pyclass(module = "lms", get_all)]
struct Simulation {
    y: Vec<Vec<f64>>,
    /// Latent coordinates, or one-element rows of atom indices.
    latent: Vec<Vec<f64>>,
    atoms: Option<Vec<usize>>,
    phi: Option<Vec<Vec<f64>>>,
}

#[pyfunction]
fn simulate(config_json: &str) -> PyResult<Simulation> {
    let cfg: SimConfig = from_json(config_json, "simulation config")?;
    let out = core_simulate(&cfg).map_err(to_py)?;
    let (latent, atoms) = match &out.z.points {
        LatentPoints::Coords(m) => (m.to_rows(), None),
        LatentPoints::Atoms(a) => (a.iter().map(|&v| vec![v as f64]).collect(), Some(a.clone())),
    };
    Ok(Simulation {
        y: out.y.to_rows(),
        latent,
        atoms,
        phi: out.phi_z.map(|m| m.to_rows()),
    })
}

/// Preset simulation configs as JSON: "torus", "mixture3", "mixture10" or
/// "selection1".."selection4".
#[pyfunction]
#[pyo3(signature = (name, n, p, sigma, seed=0))]
fn preset(name: &str, n: usize, p: usize, sigma: f64, seed: u64) -> PyResult<String> {
    let cfg = match name {
        "torus" => experiments::torus_config(n, p, sigma, seed),
        "mixture3" => experiments::mixture3_config(n, p, sigma, seed),
        "mixture10" => experiments::mixture10_config(n, p, sigma, seed),
        s if s.starts_with("selection") => {
            let c: usize = s["selection".len()..]
                .parse()
                .map_err(|_| PyValueError::new_err(format!("unknown preset {s}")))?;
            experiments::selection_config(c, n, p, sigma, seed).map_err(to_py)?
        }
        other => return Err(PyValueError::new_err(format!("unknown preset {other}"))),
    };
    serde_json::to_string(&cfg).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(module = "lms")]
struct Embedding {
    inner: CoreEmbedding,
}

#[pymethods]
impl Embedding {
    #[getter]
    fn scores(&self) -> Vec<Vec<f64>> {
        self.inner.scores.to_rows()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank
    }

    /// Scores divided by √p.
    fn normalized_scores(&self) -> Vec<Vec<f64>> {
        self.inner.normalized_scores().to_rows()
    }

    /// `(uniform_error, pairwise_error, q)` after Procrustes alignment.
    fn align(&self, targets: Vec<Vec<f64>>) -> PyResult<(f64, f64, Vec<Vec<f64>>)> {
        let rep = align(&self.inner, &matrix(targets)?).map_err(to_py)?;
        Ok((rep.uniform_error, rep.pairwise_error, rep.q.to_rows()))
    }
}

#[pyfunction]
#[pyo3(name = "pc_scores", signature = (y, r, centered=false))]
fn py_pc_scores(y: Vec<Vec<f64>>, r: usize, centered: bool) -> PyResult<Embedding> {
    Ok(Embedding {
        inner: pc_scores(&matrix(y)?, r, centered).map_err(to_py)?,
    })
}

/// `(selected_r, [(r, d_r), ...])`.
#[pyfunction]
#[pyo3(signature = (y, r_max=None, seed=0))]
fn select_dimension(y: Vec<Vec<f64>>, r_max: Option<usize>, seed: u64) -> PyResult<(usize, Vec<(usize, f64)>)> {
    let y = matrix(y)?;
    let (n, p) = y.shape();
    let rep = wasserstein_dimension_select(&y, r_max.unwrap_or_else(|| default_r_max(n, p)), seed).map_err(to_py)?;
    Ok((rep.selected, rep.curve))
}

#[pyfunction]
fn elbow(eigenvalues: Vec<f64>) -> PyResult<usize> {
    Ok(elbow_select(&eigenvalues).map_err(to_py)?.selected)
}

#[pyfunction]
#[pyo3(signature = (a, b, wa=None, wb=None))]
fn wasserstein1(
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    wa: Option<Vec<f64>>,
    wb: Option<Vec<f64>>,
) -> PyResult<f64> {
    let cloud = |m: Matrix, w: Option<Vec<f64>>| match w {
        Some(w) => WeightedCloud::new(m, w),
        None => WeightedCloud::uniform(m),
    };
    let a = cloud(matrix(a)?, wa).map_err(to_py)?;
    let b = cloud(matrix(b)?, wb).map_err(to_py)?;
    Ok(core_w1(&a, &b).map_err(to_py)?.0)
}

#[pyclass(module = "lms")]
struct Diagram {
    inner: PersistenceDiagram,
}

#[pymethods]
impl Diagram {
    /// `(dim, birth, death, flagged)`; flagged points never died.
    #[getter]
    fn points(&self) -> Vec<(u8, f64, f64, bool)> {
        self.inner.points.iter().map(|p| (p.dim, p.birth, p.death, p.flagged)).collect()
    }

    #[getter]
    fn max_scale(&self) -> f64 {
        self.inner.max_scale
    }

    /// `(beta0, beta1)` counting points with persistence above `cutoff`.
    #[pyo3(signature = (cutoff=0.2))]
    fn count_features(&self, cutoff: f64) -> (usize, usize) {
        count_features(&self.inner, cutoff)
    }

    fn pairs(&self, dim: u8) -> Vec<(f64, f64)> {
        self.inner.dimension(dim).map(|p| (p.birth, p.death)).collect()
    }
}

#[pyfunction]
#[pyo3(signature = (points, max_scale, max_dim=1, cap=DEFAULT_H1_CAP))]
fn rips_persistence(points: Vec<Vec<f64>>, max_scale: f64, max_dim: u8, cap: usize) -> PyResult<Diagram> {
    let inner = rips_persistence_capped(&matrix(points)?, max_scale, max_dim, cap).map_err(to_py)?;
    Ok(Diagram { inner })
}

#[pyfunction]
fn bottleneck(a: Vec<(f64, f64)>, b: Vec<(f64, f64)>) -> f64 {
    bottleneck_points(&a, &b)
}

/// Graph geodesic distances. Give `k` for a kNN graph or `quantile` for an
/// ε-graph; `fallback` is "euclidean" or "infinite".
#[pyfunction]
#[pyo3(signature = (points, k=None, quantile=None, fallback="euclidean"))]
fn geodesics(
    points: Vec<Vec<f64>>,
    k: Option<usize>,
    quantile: Option<f64>,
    fallback: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let mode = match (k, quantile) {
        (Some(k), None) => GraphMode::Knn { k },
        (None, Some(q)) => GraphMode::EpsQuantile { q },
        (None, None) => GraphMode::default(),
        _ => return Err(PyValueError::new_err("give at most one of k and quantile")),
    };
    let fallback = match fallback {
        "euclidean" => Fallback::Euclidean,
        "infinite" => Fallback::Infinite,
        other => return Err(PyValueError::new_err(format!("unknown fallback {other}"))),
    };
    let pts = matrix(points)?;
    let g = neighbor_graph(&pts, mode).map_err(to_py)?;
    Ok(graph_geodesics(&g, &pts, fallback).map_err(to_py)?.to_rows())
}

#[pyfunction]
fn slope(source: Vec<Vec<f64>>, target: Vec<Vec<f64>>) -> PyResult<f64> {
    isometry_slope(&matrix(source)?, &matrix(target)?).map_err(to_py)
}

#[pyfunction]
fn metric_tensor(kernel_json: &str, xi: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let spec: KernelSpec = from_json(kernel_json, "kernel")?;
    Ok(riemannian_metric(&spec, &xi).map_err(to_py)?.h.to_rows())
}

/// kNN error curve. Pass `values` (rows of responses) for regression or
/// `labels` for classification. Returns dicts with r, mean, p5, p95, target.
#[pyfunction]
#[pyo3(signature = (y, values=None, labels=None, r_grid=None, n_splits=200, k=5, seed=0))]
#[allow(clippy::too_many_arguments)]
fn knn_error_curve(
    py: Python<'_>,
    y: Vec<Vec<f64>>,
    values: Option<Vec<Vec<f64>>>,
    labels: Option<Vec<usize>>,
    r_grid: Option<Vec<usize>>,
    n_splits: usize,
    k: usize,
    seed: u64,
) -> PyResult<Vec<Py<pyo3::types::PyDict>>> {
    let targets = match (values, labels) {
        (Some(v), None) => Targets::regression(matrix(v)?),
        (None, Some(labels)) => Targets::Classification { labels },
        _ => return Err(PyValueError::new_err("give exactly one of values and labels")),
    };
    let mut opts = CurveOptions { n_splits, k, seed, ..CurveOptions::default() };
    if let Some(g) = r_grid {
        opts.r_grid = g;
    }
    let y = matrix(y)?;
    let curve = py.detach(|| error_curve(&y, &targets, &opts)).map_err(to_py)?;
    curve
        .rows
        .iter()
        .map(|row| {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("r", row.r)?;
            d.set_item("metric", curve.metric.name())?;
            d.set_item("mean", row.mean)?;
            d.set_item("p5", row.p5)?;
            d.set_item("p95", row.p95)?;
            d.set_item("target", row.target.clone())?;
            Ok(d.unbind())
        })
        .collect()
}

#[pymodule]
#[pyo3(name = "lms")]
fn lms_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", lms_core::VERSION)?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<Simulation>()?;
    m.add_class::<Embedding>()?;
    m.add_class::<Diagram>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(py_pc_scores, m)?)?;
    m.add_function(wrap_pyfunction!(select_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(elbow, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein1, m)?)?;
    m.add_function(wrap_pyfunction!(rips_persistence, m)?)?;
    m.add_function(wrap_pyfunction!(bottleneck, m)?)?;
    m.add_function(wrap_pyfunction!(geodesics, m)?)?;
    m.add_function(wrap_pyfunction!(slope, m)?)?;
    m.add_function(wrap_pyfunction!(metric_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(knn_error_curve, m)?)?;
    Ok(())
}
