//! Desk-scale figure runs.

use lms_core::embed::pc_scores;
use lms_core::experiments::{
    geodesic_comparison, latent_points, mixture_classification, mixture_error_grid, mixture_scatter,
    recovery_curve, selection_config, selection_run, torus_regression, torus_run, torus_topology, ErrorCell,
    TorusRun, TORUS_MAX_SCALE,
};
use lms_core::geometry::{distance_pairs, GraphMode};
use lms_core::knn::CurveOptions;
use lms_core::latent::torus_angles;
use lms_core::tda::{count_features, rips_persistence, subsample_indices};
use lms_core::Matrix;
use serde_json::{json, Value};

use crate::commands::{curve_minima, write_named, write_table};
use crate::config::{Config, Figure};
use crate::error::{config_err, CliError};
use crate::output::Outputs;

const TORUS_N: usize = 400;
const TORUS_P: usize = 500;
const TORUS_R: usize = 20;
const CUTOFF: f64 = 0.2;

/// Points kept for the persistence panels of the selection runs.
const SELECTION_TDA_POINTS: usize = 300;
/// Rips scale for the selection runs; covers every pairwise distance in the
/// planar regions.
const SELECTION_MAX_SCALE: f64 = 4.5;
const SELECTION_GRAPH_QUANTILE: f64 = 0.05;
const RECOVERY_GRID: [usize; 10] = [1, 2, 3, 4, 5, 6, 8, 10, 15, 20];

pub fn reproduce_cmd(cfg: &Config, seed: u64, out: &mut Outputs) -> Result<Value, CliError> {
    let s = cfg
        .reproduce
        .as_ref()
        .ok_or_else(|| config_err("missing [reproduce] section"))?;
    if s.replicates == Some(0) || s.n_splits == Some(0) {
        return Err(config_err("`replicates` and `n_splits` must be positive"));
    }
    let replicates = s.replicates.unwrap_or(20);
    match s.target {
        Figure::Fig4 => fig4(seed, replicates, out),
        Figure::Fig5 => fig5(seed, out),
        Figure::Fig7 => fig7(&torus(seed)?, out),
        Figure::Fig8 => fig8(&torus(seed)?, out),
        Figure::Fig9 => fig9(&torus(seed)?, out),
        Figure::Fig10 => fig10(seed, s.n_splits.unwrap_or(50), out),
        Figure::Fig11 => fig11(seed, s.n_splits.unwrap_or(200), out),
        Figure::Fig12 => fig12(seed, out),
    }
}

fn grid_rows(cells: &[ErrorCell]) -> Vec<Vec<String>> {
    cells
        .iter()
        .map(|c| {
            vec![
                c.n.to_string(),
                c.p.to_string(),
                c.mean_pairwise_error.to_string(),
                c.mean_uniform_error.to_string(),
                c.replicates.to_string(),
            ]
        })
        .collect()
}

const GRID_HEADER: [&str; 5] = ["n", "p", "mean_pairwise_error", "mean_uniform_error", "replicates"];

fn fig4(seed: u64, replicates: usize, out: &mut Outputs) -> Result<Value, CliError> {
    let grid = mixture_error_grid(&[100, 200, 400], &[200, 1000, 5000], 1.0, replicates, seed)?;
    out.write("fig4_grid.csv", |w| write_table(w, &GRID_HEADER, grid_rows(&grid)))?;
    let fixed = mixture_error_grid(&[500, 1000, 2000], &[200], 1.0, replicates, seed)?;
    out.write("fig4_fixed_p.csv", |w| write_table(w, &GRID_HEADER, grid_rows(&fixed)))?;
    Ok(json!({ "grid": grid, "fixed_p": fixed }))
}

fn fig5(seed: u64, out: &mut Outputs) -> Result<Value, CliError> {
    let sc = mixture_scatter(200, 1000, 1.0, seed)?;
    out.write("fig5_scores.csv", |w| {
        write_table(
            w,
            &["atom", "s1", "s2", "s3"],
            sc.aligned_scores.row_iter().zip(&sc.atoms).map(|(r, a)| {
                let mut v = vec![a.to_string()];
                v.extend(r.iter().map(f64::to_string));
                v
            }),
        )
    })?;
    out.write("fig5_phi.csv", |w| {
        write_table(
            w,
            &["atom", "phi1", "phi2", "phi3"],
            sc.phi.row_iter().enumerate().map(|(a, r)| {
                let mut v = vec![a.to_string()];
                v.extend(r.iter().map(f64::to_string));
                v
            }),
        )
    })?;
    Ok(json!({ "n": sc.n, "p": sc.p }))
}

fn torus(seed: u64) -> Result<TorusRun, CliError> {
    Ok(torus_run(TORUS_N, TORUS_P, 0.0, seed, TORUS_R)?)
}

fn with_angles(m: &Matrix, az: &[f64], el: &[f64], prefix: &str, header_cols: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header: Vec<String> = (1..=header_cols).map(|k| format!("{prefix}{k}")).collect();
    header.push("azimuth".into());
    header.push("elevation".into());
    let rows = m
        .row_iter()
        .enumerate()
        .map(|(i, r)| {
            let mut v: Vec<String> = r[..header_cols].iter().map(f64::to_string).collect();
            v.push(az[i].to_string());
            v.push(el[i].to_string());
            v
        })
        .collect();
    (header, rows)
}

fn fig7(run: &TorusRun, out: &mut Outputs) -> Result<Value, CliError> {
    let (az, el) = torus_angles(&run.z)?;
    let scores = run.scores(9);
    let (h, rows) = with_angles(&scores, &az, &el, "pc", 9);
    out.write("fig7_scores.csv", |w| {
        write_table(w, &h.iter().map(String::as_str).collect::<Vec<_>>(), rows)
    })?;
    let (h, rows) = with_angles(run.latent(), &az, &el, "z", 3);
    out.write("fig7_latent.csv", |w| {
        write_table(w, &h.iter().map(String::as_str).collect::<Vec<_>>(), rows)
    })?;
    Ok(json!({ "n": TORUS_N, "p": TORUS_P, "eigenvalues": run.embedding.eigenvalues }))
}

fn fig8(run: &TorusRun, out: &mut Outputs) -> Result<Value, CliError> {
    let diagrams = torus_topology(run, &[3, TORUS_R], TORUS_MAX_SCALE, CUTOFF)?;
    for d in &diagrams {
        out.write(&format!("fig8_{}.csv", d.label), |w| Ok(d.diagram.write_csv(w)?))?;
    }
    out.write("fig8_counts.csv", |w| {
        write_table(
            w,
            &["label", "beta0", "beta1"],
            diagrams
                .iter()
                .map(|d| vec![d.label.clone(), d.counts.0.to_string(), d.counts.1.to_string()]),
        )
    })?;
    let counts: serde_json::Map<String, Value> = diagrams
        .iter()
        .map(|d| (d.label.clone(), json!([d.counts.0, d.counts.1])))
        .collect();
    Ok(json!({ "max_scale": TORUS_MAX_SCALE, "cutoff": CUTOFF, "counts": counts }))
}

fn fig9(run: &TorusRun, out: &mut Outputs) -> Result<Value, CliError> {
    let cmp = geodesic_comparison(run.latent(), &run.scores(TORUS_R), GraphMode::default())?;
    out.write("fig9_slope.csv", |w| {
        write_table(
            w,
            &["slope", "reference"],
            [vec![cmp.slope.to_string(), std::f64::consts::SQRT_2.to_string()]],
        )
    })?;
    let pairs = distance_pairs(&cmp.latent, &cmp.scores);
    out.write("fig9_pairs.csv", |w| {
        write_table(
            w,
            &["latent_geodesic", "score_geodesic"],
            pairs.iter().map(|(a, b)| vec![a.to_string(), b.to_string()]),
        )
    })?;
    Ok(json!({ "slope": cmp.slope, "reference": std::f64::consts::SQRT_2 }))
}

fn fig10(seed: u64, n_splits: usize, out: &mut Outputs) -> Result<Value, CliError> {
    let mut grid: Vec<usize> = (1..=30).collect();
    grid.extend((40..=200).step_by(20));
    let opts = CurveOptions { r_grid: grid, n_splits, seed, ..CurveOptions::default() };
    let curve = torus_regression(1000, 500, 1.0, seed, &opts)?;
    out.write("fig10_error_curve.csv", |w| Ok(curve.write_csv(w)?))?;
    Ok(json!({ "n_splits": n_splits, "minima": curve_minima(&curve) }))
}

fn fig11(seed: u64, n_splits: usize, out: &mut Outputs) -> Result<Value, CliError> {
    let opts = CurveOptions { r_grid: (1..=40).collect(), n_splits, seed, ..CurveOptions::default() };
    let curve = mixture_classification(250, 10_000, 10.0, seed, &opts)?;
    out.write("fig11_error_curve.csv", |w| Ok(curve.write_csv(w)?))?;
    Ok(json!({ "n_splits": n_splits, "minima": curve_minima(&curve) }))
}

fn fig12(seed: u64, out: &mut Outputs) -> Result<Value, CliError> {
    let (n, p, sigma) = (500, 1000, 1.0);
    let mut summary = Vec::new();
    let mut counts_rows = Vec::new();
    for c in 1..=4 {
        let cfg = selection_config(c, n, p, sigma, seed)?;
        let run = selection_run(&cfg, c, lms_core::dimsel::default_r_max(n, p))?;
        out.write(&format!("fig12a_c{c}.csv"), |w| Ok(run.z.write_csv(w)?))?;
        let r_top = run.wasserstein.selected.max(*RECOVERY_GRID.last().unwrap_or(&1));
        let scores = pc_scores(&run.y, r_top, false)?.normalized_scores();
        out.write(&format!("fig12b_c{c}.csv"), |w| write_named(w, "pc", &scores.leading_columns(2)))?;
        out.write(&format!("fig12c_c{c}.csv"), |w| {
            write_table(
                w,
                &["r", "d_wasserstein", "elbow_r"],
                run.wasserstein
                    .curve
                    .iter()
                    .map(|(r, d)| vec![r.to_string(), d.to_string(), run.elbow.to_string()]),
            )
        })?;

        let idx = subsample_indices(n, SELECTION_TDA_POINTS, seed);
        let latent = latent_points(&run.z).select_rows(&idx);
        let sub_scores = scores.select_rows(&idx);
        let mut entry = json!({
            "config": c,
            "wasserstein_r": run.wasserstein.selected,
            "elbow_r": run.elbow,
        });
        if c >= 3 {
            let curve = recovery_curve(
                &latent,
                &sub_scores,
                &RECOVERY_GRID,
                SELECTION_GRAPH_QUANTILE,
                SELECTION_MAX_SCALE,
            )?;
            out.write(&format!("fig12d_c{c}.csv"), |w| {
                write_table(
                    w,
                    &["r", "geodesic_mse", "bottleneck_h0", "bottleneck_h1"],
                    curve.iter().map(|pt| {
                        vec![
                            pt.r.to_string(),
                            pt.geodesic_mse.to_string(),
                            pt.bottleneck_h0.to_string(),
                            pt.bottleneck_h1.to_string(),
                        ]
                    }),
                )
            })?;
            entry["recovery"] = json!(curve);
        }
        let r_hat = run.wasserstein.selected;
        let diagram = rips_persistence(&sub_scores.leading_columns(r_hat), SELECTION_MAX_SCALE, 1)?;
        let (b0, b1) = count_features(&diagram, CUTOFF);
        out.write(&format!("fig12e_c{c}.csv"), |w| Ok(diagram.write_csv(w)?))?;
        counts_rows.push(vec![c.to_string(), r_hat.to_string(), b0.to_string(), b1.to_string()]);
        entry["beta"] = json!([b0, b1]);
        summary.push(entry);
    }
    out.write("fig12e_counts.csv", |w| write_table(w, &["config", "r", "beta0", "beta1"], counts_rows))?;
    Ok(json!({ "n": n, "p": p, "sigma": sigma, "configs": summary }))
}
