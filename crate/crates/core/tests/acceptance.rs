//! The fourteen acceptance criteria, run in order. Each prints one
//! PASS/FAIL line with its runtime; any failure makes the target fail.

mod props;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use lms_core::dimsel::wasserstein_dimension_select;
use lms_core::embed::{centered_kernel, scores_covariance_route, scores_gram_route, AlignmentReport};
use lms_core::experiments::{
    concentration_error, geodesic_comparison, mixture3_config, mixture_classification, mixture_error_grid,
    selection_config, torus_config, torus_regression, torus_run, torus_topology, TORUS_MAX_SCALE,
};
use lms_core::geometry::GraphMode;
use lms_core::kernels::{
    gram, kernel_eval, numerical_rank, riemannian_metric, KernelSpec, Profile, TranslationProfile,
};
use lms_core::knn::{CurveOptions, ErrorCurve};
use lms_core::latent::{LatentPoint, LatentSample, LatentSpace, Region};
use lms_core::linalg::dist;
use lms_core::rng::stream_rng;
use lms_core::sim::{conditional_gram_expectation, simulate};
use lms_core::tda::bottleneck_points;
use lms_core::transport::{wasserstein1, WeightedCloud};
use lms_core::Matrix;
use rand::Rng;
use rand_distr::StandardNormal;

use orderings::permutations;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = stream_rng(seed, 0);
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn planar(n: usize, seed: u64) -> LatentSample {
    let mut rng = stream_rng(seed, 1);
    let coords = Matrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
    let space = LatentSpace::PlanarRegion {
        region: Region::Annulus { center: [0.0, 0.0], inner_radius: 0.0, outer_radius: 2.0 },
    };
    LatentSample::from_coords(space, coords).unwrap()
}

/// Score routes agree up to column signs.
fn c1() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, (n, p)) in [(50, 80), (80, 50)].into_iter().enumerate() {
        let y = gaussian(n, p, 100 + i as u64);
        let r = n.min(p);
        let a = scores_gram_route(&y, r, false).map_err(|e| e.to_string())?;
        let b = scores_covariance_route(&y, r, false).map_err(|e| e.to_string())?;
        let mut diff = 0.0;
        for k in 0..r {
            let ca = a.scores.column(k);
            let cb = b.scores.column(k);
            let same: f64 = ca.iter().zip(&cb).map(|(x, y)| (x - y).powi(2)).sum();
            let flip: f64 = ca.iter().zip(&cb).map(|(x, y)| (x + y).powi(2)).sum();
            diff += same.min(flip);
        }
        worst = worst.max(diff.sqrt());
    }
    check(worst <= 1e-8, format!("max Frobenius gap {worst:.2e}"))
}

/// `pairwise_error ≤ 2·uniform_error + 1e-9` on every run.
fn c2() -> Outcome {
    let mut reports: Vec<(String, AlignmentReport)> = Vec::new();
    for p in [200, 1000, 5000] {
        for s in 0..20 {
            let rep = concentration_error(&mixture3_config(200, p, 1.0, s), 3).map_err(|e| e.to_string())?;
            reports.push((format!("mixture p={p} seed={s}"), rep));
        }
    }
    for (c, r) in [(1, 6), (2, 6), (3, 5), (4, 10)] {
        for s in 0..5 {
            let cfg = selection_config(c, 300, 500, 1.0, s).map_err(|e| e.to_string())?;
            reports.push((format!("config {c} seed={s}"), concentration_error(&cfg, r).map_err(|e| e.to_string())?));
        }
    }
    for s in 0..5 {
        let rep = concentration_error(&torus_config(200, 500, 0.5, s), 10).map_err(|e| e.to_string())?;
        reports.push((format!("torus seed={s}"), rep));
    }
    let bad: Vec<&String> = reports
        .iter()
        .filter(|(_, r)| r.pairwise_error > 2.0 * r.uniform_error + 1e-9)
        .map(|(l, _)| l)
        .collect();
    check(bad.is_empty(), format!("{} runs checked, violations: {bad:?}", reports.len()))
}

/// Mean pairwise error falls with p and halves by p=5000.
fn c3() -> Outcome {
    let cells = mixture_error_grid(&[200], &[200, 1000, 5000], 1.0, 20, 0).map_err(|e| e.to_string())?;
    let e: Vec<f64> = cells.iter().map(|c| c.mean_pairwise_error).collect();
    check(
        e[0] > e[1] && e[1] > e[2] && e[2] < 0.5 * e[0],
        format!("errors at p=200,1000,5000: {e:.4?}"),
    )
}

/// Errors at fixed p stay within a factor 1.5.
fn c4() -> Outcome {
    let cells = mixture_error_grid(&[500, 1000, 2000], &[200], 1.0, 20, 0).map_err(|e| e.to_string())?;
    let e: Vec<f64> = cells.iter().map(|c| c.mean_pairwise_error).collect();
    let hi = e.iter().cloned().fold(f64::MIN, f64::max);
    let lo = e.iter().cloned().fold(f64::MAX, f64::min);
    check(hi <= 1.5 * lo, format!("errors at n=500,1000,2000: {e:.4?}"))
}

/// Entrywise Monte-Carlo check of `E[p⁻¹YYᵀ | Z] = K + σ²I`.
fn c5() -> Outcome {
    let (n, p, sigma) = (50, 20_000, 1.0);
    let cfg = torus_config(n, p, sigma, 21);
    let out = simulate(&cfg).map_err(|e| e.to_string())?;
    let want = conditional_gram_expectation(&out.z, &cfg.kernel, sigma).map_err(|e| e.to_string())?;
    let y = &out.y;
    let pf = p as f64;
    let mut inside = 0usize;
    for i in 0..n {
        for k in 0..n {
            let (yi, yk) = (y.row(i), y.row(k));
            let prods: Vec<f64> = yi.iter().zip(yk).map(|(a, b)| a * b).collect();
            let mean = prods.iter().sum::<f64>() / pf;
            let var = prods.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (pf - 1.0);
            let se = (var / pf).sqrt();
            if (mean - want[(i, k)]).abs() <= 5.0 * se {
                inside += 1;
            }
        }
    }
    let frac = inside as f64 / (n * n) as f64;
    check(frac >= 0.99, format!("{:.2}% of entries within 5 SE", 100.0 * frac))
}

/// Polynomial (a=1, b=2) and cosine-sum Gram ranks on 12 planar points.
fn c6() -> Outcome {
    let z = planar(12, 6);
    let poly = gram(&KernelSpec::Polynomial { a: 1.0, b: 2 }, &z).map_err(|e| e.to_string())?;
    let cos = gram(&KernelSpec::CosineSum { offset: 2.0 }, &z).map_err(|e| e.to_string())?;
    let rp = numerical_rank(&poly, 1e-8).map_err(|e| e.to_string())?;
    let rc = numerical_rank(&cos, 1e-8).map_err(|e| e.to_string())?;
    check(rp == 6 && rc == 5, format!("polynomial rank {rp}, cosine-sum rank {rc}"))
}

/// `g(u) = (1 + ‖u‖²)⁻²`, so `−∇²g(0) = 4I`.
#[derive(Debug)]
struct SquaredCauchy;

impl TranslationProfile for SquaredCauchy {
    fn value(&self, u: &[f64]) -> f64 {
        let t: f64 = u.iter().map(|v| v * v).sum();
        (1.0 + t).powi(-2)
    }

    fn neg_hessian_at_origin(&self, d: usize) -> Matrix {
        Matrix::identity(d).scaled(4.0)
    }
}

/// Analytic metric tensors against central differences of the kernel.
fn c7() -> Outcome {
    let kernels = [
        ("rbf", KernelSpec::Rbf { scale: 1.5 }),
        ("polynomial", KernelSpec::Polynomial { a: 1.0, b: 3 }),
        ("cosine_sum", KernelSpec::CosineSum { offset: 2.0 }),
        ("custom", KernelSpec::TranslationInvariant { profile: Profile::Custom(Arc::new(SquaredCauchy)) }),
    ];
    let h = 1e-4;
    let mut rng = stream_rng(7, 0);
    let mut worst: f64 = 0.0;
    let mut indefinite = Vec::new();
    for (name, k) in &kernels {
        for _ in 0..20 {
            let d = 2;
            let xi: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = riemannian_metric(k, &xi).map_err(|e| e.to_string())?;
            let f = |a: &[f64], b: &[f64]| kernel_eval(k, LatentPoint::Coord(a), LatentPoint::Coord(b)).unwrap();
            let scale = m.h.max_abs().max(1e-12);
            for i in 0..d {
                for j in 0..d {
                    let shift = |s: f64, t: usize| {
                        let mut v = xi.clone();
                        v[t] += s;
                        v
                    };
                    let fd = (f(&shift(h, i), &shift(h, j)) - f(&shift(h, i), &shift(-h, j))
                        - f(&shift(-h, i), &shift(h, j))
                        + f(&shift(-h, i), &shift(-h, j)))
                        / (4.0 * h * h);
                    worst = worst.max((fd - m.h[(i, j)]).abs() / scale);
                }
            }
            if !m.is_positive_definite().map_err(|e| e.to_string())? {
                indefinite.push(*name);
            }
        }
    }
    check(
        worst <= 1e-5 && indefinite.is_empty(),
        format!("max relative gap {worst:.2e}, non-PD: {indefinite:?}"),
    )
}

/// Isometry slope near √2 on the noiseless torus.
fn c8() -> Outcome {
    let run = torus_run(400, 500, 0.0, 0, 20).map_err(|e| e.to_string())?;
    let cmp = geodesic_comparison(run.latent(), &run.scores(20), GraphMode::Knn { k: 5 }).map_err(|e| e.to_string())?;
    check((1.34..=1.49).contains(&cmp.slope), format!("slope {:.4}", cmp.slope))
}

/// Both torus holes survive in 20 score dimensions, one in 3.
fn c9() -> Outcome {
    let run = torus_run(400, 500, 0.0, 0, 20).map_err(|e| e.to_string())?;
    let d = torus_topology(&run, &[3, 20], TORUS_MAX_SCALE, 0.2).map_err(|e| e.to_string())?;
    let get = |label: &str| d.iter().find(|x| x.label == label).map(|x| x.counts).unwrap_or((0, 0));
    let (latent, r3, r20) = (get("latent"), get("scores_r3"), get("scores_r20"));
    check(
        latent == (1, 2) && r20 == (1, 2) && r3.1 == 1,
        format!("latent {latent:?}, dim-3 {r3:?}, dim-20 {r20:?}"),
    )
}

fn select(config: usize, sigma: f64, seed: u64) -> Result<usize, String> {
    let cfg = selection_config(config, 500, 1000, sigma, seed).map_err(|e| e.to_string())?;
    let out = simulate(&cfg).map_err(|e| e.to_string())?;
    let r_max = lms_core::dimsel::default_r_max(500, 1000);
    Ok(wasserstein_dimension_select(&out.y, r_max, seed).map_err(|e| e.to_string())?.selected)
}

fn median(v: &[usize]) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable();
    let m = s.len() / 2;
    if s.len() % 2 == 0 {
        (s[m - 1] + s[m]) as f64 / 2.0
    } else {
        s[m] as f64
    }
}

/// Wasserstein selection on the rank-6 and RBF configurations.
fn c10() -> Outcome {
    let rank6: Vec<usize> = (0..10).map(|s| select(1, 1.0, s)).collect::<Result<_, _>>()?;
    let hits = rank6.iter().filter(|r| (4..=9).contains(*r)).count();
    let mut medians = Vec::new();
    let mut rbf_sigma1 = Vec::new();
    for sigma in [0.25, 1.0, 4.0] {
        let picks: Vec<usize> = (0..10).map(|s| select(4, sigma, s)).collect::<Result<_, _>>()?;
        if sigma == 1.0 {
            rbf_sigma1 = picks.clone();
        }
        medians.push(median(&picks));
    }
    let finite = rbf_sigma1.iter().all(|&r| 1 < r && r < 50);
    let monotone = medians.windows(2).all(|w| w[0] >= w[1]);
    check(
        hits >= 8 && finite && monotone,
        format!("rank-6 picks {rank6:?}; RBF σ=1 picks {rbf_sigma1:?}; medians over σ=0.25,1,4: {medians:?}"),
    )
}

mod orderings {
    /// Every ordering of `0..n`.
    pub fn permutations(n: usize) -> Vec<Vec<usize>> {
        fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
            if cur.len() == used.len() {
                out.push(cur.clone());
                return;
            }
            for i in 0..used.len() {
                if !used[i] {
                    used[i] = true;
                    cur.push(i);
                    rec(cur, used, out);
                    cur.pop();
                    used[i] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; n], &mut out);
        out
    }
}

fn brute_bottleneck(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (k, l) = (a.len(), b.len());
    // Left side: a then diagonal slots; right side: b then diagonal slots.
    let cost = |i: usize, j: usize| -> f64 {
        match (i < k, j < l) {
            (true, true) => (a[i].0 - b[j].0).abs().max((a[i].1 - b[j].1).abs()),
            (true, false) => (a[i].1 - a[i].0) / 2.0,
            (false, true) => (b[j].1 - b[j].0) / 2.0,
            (false, false) => 0.0,
        }
    };
    permutations(k + l)
        .into_iter()
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| cost(i, j)).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

/// Exact transport and bottleneck values against enumeration.
fn c11() -> Outcome {
    let mut rng = stream_rng(11, 0);
    let mut worst_ot: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=6);
        let a = Matrix::from_fn(n, 2, |_, _| rng.random_range(-3.0..3.0));
        let b = Matrix::from_fn(n, 2, |_, _| rng.random_range(-3.0..3.0));
        let (w, _) = wasserstein1(
            &WeightedCloud::uniform(a.clone()).map_err(|e| e.to_string())?,
            &WeightedCloud::uniform(b.clone()).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let brute = permutations(n)
            .into_iter()
            .map(|perm| perm.iter().enumerate().map(|(i, &j)| dist(a.row(i), b.row(j))).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min);
        worst_ot = worst_ot.max((w - brute).abs());
    }
    let mut mismatches = 0;
    let diagram = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<(f64, f64)> {
        let k = rng.random_range(0..=4);
        (0..k)
            .map(|_| {
                let b: f64 = rng.random_range(0.0..2.0);
                (b, b + rng.random_range(0.0..2.0))
            })
            .collect()
    };
    for _ in 0..50 {
        let a = diagram(&mut rng);
        let b = diagram(&mut rng);
        if bottleneck_points(&a, &b) != brute_bottleneck(&a, &b) {
            mismatches += 1;
        }
    }
    check(
        worst_ot <= 1e-9 && mismatches == 0,
        format!("max transport gap {worst_ot:.2e}, bottleneck mismatches {mismatches}/50"),
    )
}

fn mean_at(curve: &ErrorCurve, target: Option<&str>, r: usize) -> f64 {
    curve.for_target(target).into_iter().find(|row| row.r == r).map_or(f64::NAN, |row| row.mean)
}

/// U-shaped kNN error curves for regression and classification.
fn c12() -> Outcome {
    let opts = CurveOptions { r_grid: vec![1, 20, 200], n_splits: 50, seed: 0, ..CurveOptions::default() };
    let reg = torus_regression(1000, 500, 1.0, 0, &opts).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    let mut ok = true;
    for t in ["azimuth", "elevation"] {
        let (a, b, c) = (mean_at(&reg, Some(t), 1), mean_at(&reg, Some(t), 20), mean_at(&reg, Some(t), 200));
        ok &= b < a && b < c;
        detail.push(format!("{t} r=1,20,200: {a:.3}, {b:.3}, {c:.3}"));
    }
    let opts = CurveOptions { r_grid: (1..=40).collect(), n_splits: 200, seed: 0, ..CurveOptions::default() };
    let cls = mixture_classification(250, 10_000, 10.0, 0, &opts).map_err(|e| e.to_string())?;
    let best = cls
        .rows
        .iter()
        .min_by(|a, b| a.mean.total_cmp(&b.mean).then(a.r.cmp(&b.r)))
        .map(|row| (row.r, row.mean))
        .unwrap_or((0, f64::NAN));
    ok &= (6..=20).contains(&best.0);
    detail.push(format!("classification minimum {:.3} at r={}", best.1, best.0));
    check(ok, detail.join("; "))
}

/// Entrywise centred kernel against `C K C`.
fn c13() -> Outcome {
    let z = planar(30, 13);
    let n = z.len();
    let c = Matrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - 1.0 / n as f64);
    let mut worst: f64 = 0.0;
    for k in [
        KernelSpec::Rbf { scale: 1.0 },
        KernelSpec::Polynomial { a: 1.0, b: 2 },
        KernelSpec::CosineSum { offset: 2.0 },
    ] {
        let g = gram(&k, &z).map_err(|e| e.to_string())?;
        let ckc = c.matmul(&g).and_then(|m| m.matmul(&c)).map_err(|e| e.to_string())?;
        for i in 0..n {
            for j in 0..n {
                let ft = centered_kernel(&k, &z, z.point(i), z.point(j)).map_err(|e| e.to_string())?;
                worst = worst.max((ft - ckc[(i, j)]).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("max entry gap {worst:.2e}"))
}

/// The five property suites at 100 cases each.
fn c14() -> Outcome {
    let failed: Vec<String> = props::SUITES
        .iter()
        .filter_map(|s| props::run(s, 100).err().map(|e| format!("{s}: {e}")))
        .collect();
    check(failed.is_empty(), if failed.is_empty() { "5 suites x 100 cases".into() } else { failed.join("; ") })
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, u64); 14] = [
        ("score routes agree", c1, 1),
        ("pairwise error at most twice uniform error", c2, 60),
        ("mixture error decreases in p", c3, 120),
        ("fixed-p error stabilises", c4, 120),
        ("Gram expectation Monte Carlo", c5, 60),
        ("kernel ranks", c6, 1),
        ("metric tensor finite differences", c7, 5),
        ("geodesic isometry slope", c8, 180),
        ("torus topology", c9, 180),
        ("dimension selection", c10, 900),
        ("transport and bottleneck oracles", c11, 30),
        ("kNN U-curves", c12, 600),
        ("centred kernel identity", c13, 1),
        ("property suites", c14, 120),
    ];
    let mut failures = 0;
    for (i, (name, f, limit)) in criteria.into_iter().enumerate() {
        let t0 = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = t0.elapsed();
        let slow = took > Duration::from_secs(limit);
        let (tag, detail) = match (&res, slow) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {limit} s budget")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if tag == "FAIL" {
            failures += 1;
        }
        println!("{tag} criterion {:>2} {name} ({:.2} s): {detail}", i + 1, took.as_secs_f64());
    }
    println!("acceptance: {} passed, {failures} failed", 14 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
