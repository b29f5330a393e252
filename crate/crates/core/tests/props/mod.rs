//! Randomised property suites, shared by the `properties` and `acceptance`
//! test targets.

use lms_core::geometry::{graph_geodesics, neighbor_graph, Fallback, GraphMode};
use lms_core::kernels::KernelSpec;
use lms_core::latent::LatentSpace;
use lms_core::linalg::{pairwise_distances, sym_eig};
use lms_core::sim::{simulate, SimConfig};
use lms_core::tda::{rips_persistence, subsample_indices, PersistenceDiagram};
use lms_core::transport::{wasserstein1, WeightedCloud};
use lms_core::Matrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub const SUITES: [&str; 5] = [
    "eigensolver_reconstruction",
    "transport_metric_axioms",
    "rips_scaling_equivariance",
    "geodesic_pseudometric",
    "determinism_by_seed",
];

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

/// Runs one suite; the error carries the minimal failing input.
pub fn run(name: &str, cases: u32) -> Result<(), String> {
    let mut r = runner(cases);
    let out = match name {
        "eigensolver_reconstruction" => r.run(&symmetric(), check_eigen).map_err(|e| e.to_string()),
        "transport_metric_axioms" => r
            .run(&(cloud(), cloud(), cloud()), |(a, b, c)| check_transport(a, b, c))
            .map_err(|e| e.to_string()),
        "rips_scaling_equivariance" => r
            .run(&(points(3..16, 2), 0.1f64..10.0), |(x, c)| check_rips(x, c))
            .map_err(|e| e.to_string()),
        "geodesic_pseudometric" => r
            .run(&(points(2..25, 3), graph_mode()), |(x, m)| check_geodesic(x, m))
            .map_err(|e| e.to_string()),
        "determinism_by_seed" => r
            .run(&(1usize..15, 1usize..10, any::<u64>()), |(n, p, s)| check_determinism(n, p, s))
            .map_err(|e| e.to_string()),
        other => Err(format!("unknown suite {other}")),
    };
    out
}

fn matrix(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(lo..hi, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn symmetric() -> impl Strategy<Value = Matrix> {
    (1usize..13).prop_flat_map(|n| {
        matrix(n, n, -10.0, 10.0).prop_map(|a| {
            let n = a.rows();
            Matrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
        })
    })
}

fn points(n: std::ops::Range<usize>, d: usize) -> impl Strategy<Value = Matrix> {
    n.prop_flat_map(move |n| matrix(n, d, -3.0, 3.0))
}

fn cloud() -> impl Strategy<Value = WeightedCloud> {
    (1usize..6).prop_flat_map(|n| {
        (matrix(n, 2, -5.0, 5.0), prop::collection::vec(0.05f64..1.0, n))
            .prop_map(|(m, w)| {
                let s: f64 = w.iter().sum();
                WeightedCloud::new(m, w.iter().map(|v| v / s).collect()).unwrap()
            })
    })
}

fn graph_mode() -> impl Strategy<Value = GraphMode> {
    prop_oneof![
        (1usize..6).prop_map(|k| GraphMode::Knn { k }),
        (0.05f64..1.0).prop_map(|q| GraphMode::EpsQuantile { q }),
    ]
}

fn check_eigen(a: Matrix) -> Result<(), TestCaseError> {
    let n = a.rows();
    let e = sym_eig(&a).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let v = &e.vectors;
    let scale = a.max_abs().max(1.0);
    for i in 0..n {
        for j in 0..n {
            let rec: f64 = (0..n).map(|k| v[(i, k)] * e.values[k] * v[(j, k)]).sum();
            prop_assert!((rec - a[(i, j)]).abs() <= 1e-9 * scale, "reconstruction at ({i},{j})");
            let gram: f64 = (0..n).map(|k| v[(k, i)] * v[(k, j)]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            prop_assert!((gram - want).abs() <= 1e-9, "orthonormality at ({i},{j})");
        }
    }
    prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    Ok(())
}

fn w1(a: &WeightedCloud, b: &WeightedCloud) -> Result<f64, TestCaseError> {
    wasserstein1(a, b)
        .map(|(c, _)| c)
        .map_err(|e| TestCaseError::fail(e.to_string()))
}

fn check_transport(a: WeightedCloud, b: WeightedCloud, c: WeightedCloud) -> Result<(), TestCaseError> {
    let ab = w1(&a, &b)?;
    let ba = w1(&b, &a)?;
    let bc = w1(&b, &c)?;
    let ac = w1(&a, &c)?;
    prop_assert!(w1(&a, &a)?.abs() <= 1e-9);
    prop_assert!(ab >= 0.0);
    prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab));
    prop_assert!(ac <= ab + bc + 1e-9 * (1.0 + ac), "triangle: {ac} > {ab} + {bc}");
    Ok(())
}

fn sorted_pairs(d: &PersistenceDiagram, dim: u8) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = d.dimension(dim).map(|p| (p.birth, p.death)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    v
}

fn check_rips(x: Matrix, c: f64) -> Result<(), TestCaseError> {
    let max_scale = 1.1 * pairwise_distances(&x).max_abs() + 1.0;
    let fail = |e: lms_core::LmsError| TestCaseError::fail(e.to_string());
    let base = rips_persistence(&x, max_scale, 1).map_err(fail)?;
    let scaled = rips_persistence(&x.scaled(c), c * max_scale, 1).map_err(fail)?;
    for dim in [0u8, 1] {
        let a = sorted_pairs(&base, dim);
        let b = sorted_pairs(&scaled, dim);
        prop_assert_eq!(a.len(), b.len(), "dimension {} counts", dim);
        for (p, q) in a.iter().zip(&b) {
            let tol = 1e-9 * c * max_scale;
            prop_assert!((c * p.0 - q.0).abs() <= tol && (c * p.1 - q.1).abs() <= tol);
        }
    }
    Ok(())
}

fn check_geodesic(x: Matrix, mode: GraphMode) -> Result<(), TestCaseError> {
    let n = x.rows();
    // Coincident points make the ε-graph degenerate; skip those draws.
    let euclid = pairwise_distances(&x);
    prop_assume!(euclid.max_abs() > 1e-9);
    let mode = match mode {
        GraphMode::Knn { k } => GraphMode::Knn { k: k.min(n - 1) },
        m => m,
    };
    let g = neighbor_graph(&x, mode).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let d = graph_geodesics(&g, &x, Fallback::Infinite).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for i in 0..n {
        prop_assert_eq!(d[(i, i)], 0.0);
        for j in 0..n {
            prop_assert!(d[(i, j)] >= 0.0);
            prop_assert_eq!(d[(i, j)], d[(j, i)]);
            prop_assert!(d[(i, j)] >= euclid[(i, j)] - 1e-9);
            for k in 0..n {
                prop_assert!(
                    d[(i, j)] <= d[(i, k)] + d[(k, j)] + 1e-9,
                    "triangle at ({i},{j},{k})"
                );
            }
        }
    }
    Ok(())
}

fn check_determinism(n: usize, p: usize, seed: u64) -> Result<(), TestCaseError> {
    let cfg = |seed| SimConfig {
        n,
        p,
        sigma: 0.5,
        kernel: KernelSpec::Rbf { scale: 1.0 },
        space: LatentSpace::Sphere { ambient_dim: 3 },
        noise: Default::default(),
        seed,
    };
    let fail = |e: lms_core::LmsError| TestCaseError::fail(e.to_string());
    let a = simulate(&cfg(seed)).map_err(fail)?;
    let b = simulate(&cfg(seed)).map_err(fail)?;
    let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    prop_assert_eq!(bits(&a.y), bits(&b.y));
    prop_assert_eq!(&a.z, &b.z);
    let c = simulate(&cfg(seed.wrapping_add(1))).map_err(fail)?;
    prop_assert_ne!(bits(&a.y), bits(&c.y));
    prop_assert_eq!(subsample_indices(40, 10, seed), subsample_indices(40, 10, seed));
    Ok(())
}
