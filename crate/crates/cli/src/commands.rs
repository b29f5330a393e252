use std::io::Write;

use lms_core::dimsel::{
    default_r_max, elbow_profile, elbow_select, scree, wasserstein_dimension_select_with, SplitOptions,
};
use lms_core::embed::{align, pc_scores};
use lms_core::experiments::latent_points;
use lms_core::geometry::{graph_geodesics, isometry_slope, neighbor_graph};
use lms_core::io::{read_matrix_path, write_matrix};
use lms_core::knn::{error_curve, ErrorCurve, Targets};
use lms_core::latent::{torus_angles, LatentSample};
use lms_core::sim::{feature_targets, simulate, SimConfig};
use lms_core::tda::{count_features, rips_persistence_capped, subsample_indices};
use lms_core::Matrix;
use serde_json::{json, Value};

use crate::config::{
    Config, DataSource, EmbedSection, GeodesicSection, PointSet, PredictSection, SelectDimSection, SelectMethod,
    TargetSpec, Task, TdaSection,
};
use crate::error::{config_err, CliError};
use crate::output::Outputs;

pub struct Data {
    pub y: Matrix,
    /// Present when the data were simulated.
    pub sim: Option<(SimConfig, LatentSample)>,
}

pub fn load(src: &DataSource) -> Result<Data, CliError> {
    match (&src.path, &src.sim) {
        (Some(path), None) => {
            if !path.is_file() {
                return Err(config_err(format!("data file {} does not exist", path.display())));
            }
            Ok(Data { y: read_matrix_path(path)?, sim: None })
        }
        (None, Some(cfg)) => {
            let out = simulate(cfg)?;
            Ok(Data { y: out.y, sim: Some((cfg.clone(), out.z)) })
        }
        _ => Err(config_err("`data` needs exactly one of `path` or `sim`")),
    }
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    s.as_ref().ok_or_else(|| config_err(format!("missing [{name}] section")))
}

/// Writes a CSV table with a header row.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(lms_core::LmsError::from)?;
    for r in rows {
        out.write_record(&r).map_err(lms_core::LmsError::from)?;
    }
    out.flush()?;
    Ok(())
}

/// A matrix with numbered column names `{prefix}1..`.
pub fn write_named<W: Write>(w: W, prefix: &str, m: &Matrix) -> Result<(), CliError> {
    let names: Vec<String> = (1..=m.cols()).map(|k| format!("{prefix}{k}")).collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    write_table(w, &header, m.row_iter().map(|r| r.iter().map(f64::to_string).collect()))
}

pub fn simulate_cmd(cfg: &Config, out: &mut Outputs) -> Result<Value, CliError> {
    let sim = section(&cfg.simulate, "simulate")?;
    let res = simulate(sim)?;
    out.write("Y.csv", |w| Ok(write_matrix(&res.y, w)?))?;
    out.write("Z.csv", |w| Ok(res.z.write_csv(w)?))?;
    if let Some(phi) = &res.phi_z {
        out.write("phi.csv", |w| write_named(w, "phi", phi))?;
    }
    Ok(json!({ "n": res.y.rows(), "p": res.y.cols(), "jitter": res.jitter }))
}

pub fn embed_cmd(cfg: &Config, out: &mut Outputs) -> Result<Value, CliError> {
    let s: &EmbedSection = section(&cfg.embed, "embed")?;
    let data = load(&s.data)?;
    let emb = pc_scores(&data.y, s.r, s.centered)?;
    out.write("scores.csv", |w| Ok(emb.write_scores_csv(w)?))?;
    out.write("eigenvalues.csv", |w| Ok(emb.write_eigenvalues_csv(w)?))?;
    let mut res = json!({ "r": emb.r, "rank": emb.rank, "eigenvalues": emb.eigenvalues });
    if s.align {
        let Some((sim, z)) = &data.sim else {
            return Err(config_err("`align` needs simulated data"));
        };
        let targets = feature_targets(&sim.kernel, z, s.r)?;
        let rep = align(&emb, &targets)?;
        out.write("aligned_scores.csv", |w| {
            write_named(w, "s", &emb.normalized_scores().matmul(&rep.q)?)
        })?;
        res["uniform_error"] = json!(rep.uniform_error);
        res["pairwise_error"] = json!(rep.pairwise_error);
    }
    Ok(res)
}

pub fn select_dim_cmd(cfg: &Config, seed: u64, out: &mut Outputs) -> Result<Value, CliError> {
    let s: &SelectDimSection = section(&cfg.select_dim, "select_dim")?;
    let data = load(&s.data)?;
    let (n, p) = data.y.shape();
    let r_max = s.r_max.unwrap_or_else(|| default_r_max(n, p));
    let mut res = json!({ "r_max": r_max });
    if matches!(s.method, SelectMethod::Wasserstein | SelectMethod::Both) {
        let rep = wasserstein_dimension_select_with(&data.y, r_max, seed, SplitOptions { shuffle: s.shuffle })?;
        out.write("wasserstein_curve.csv", |w| Ok(rep.write_curve_csv(w)?))?;
        res["wasserstein_r"] = json!(rep.selected);
    }
    if matches!(s.method, SelectMethod::Elbow | SelectMethod::Both) {
        let spectrum = scree(&data.y)?;
        let profile = elbow_profile(&spectrum)?;
        let pick = elbow_select(&spectrum)?;
        out.write("elbow_profile.csv", |w| {
            write_table(
                w,
                &["q", "eigenvalue", "profile_loglik"],
                profile
                    .iter()
                    .enumerate()
                    .map(|(k, v)| vec![(k + 1).to_string(), spectrum[k].to_string(), v.to_string()]),
            )
        })?;
        res["elbow_r"] = json!(pick.selected);
        res["elbow_degenerate"] = json!(pick.degenerate);
    }
    Ok(res)
}

/// The point cloud a section asks for.
fn points_for(data: &Data, which: PointSet, r: Option<usize>) -> Result<Matrix, CliError> {
    match which {
        PointSet::Rows => Ok(data.y.clone()),
        PointSet::Latent => match &data.sim {
            Some((_, z)) => Ok(latent_points(z)),
            None => Err(config_err("`latent` points need simulated data")),
        },
        PointSet::Scores => {
            let r = r.ok_or_else(|| config_err("`scores` points need `r`"))?;
            Ok(pc_scores(&data.y, r, false)?.normalized_scores())
        }
    }
}

pub fn tda_cmd(cfg: &Config, seed: u64, out: &mut Outputs) -> Result<Value, CliError> {
    let s: &TdaSection = section(&cfg.tda, "tda")?;
    let data = load(&s.data)?;
    let mut pts = points_for(&data, s.points, s.r)?;
    let mut kept = None;
    if s.subsample && s.max_dim >= 1 && pts.rows() > s.cap {
        let idx = subsample_indices(pts.rows(), s.cap, seed);
        pts = pts.select_rows(&idx);
        kept = Some(idx);
    }
    let diagram = rips_persistence_capped(&pts, s.max_scale, s.max_dim, s.cap)?;
    let (b0, b1) = count_features(&diagram, s.cutoff);
    out.write("diagram.csv", |w| Ok(diagram.write_csv(w)?))?;
    if let Some(idx) = &kept {
        out.write("subsample.csv", |w| write_table(w, &["row"], idx.iter().map(|i| vec![i.to_string()])))?;
    }
    Ok(json!({
        "points": pts.rows(),
        "subsampled": kept.is_some(),
        "cutoff": s.cutoff,
        "beta0": b0,
        "beta1": b1,
    }))
}

pub fn geodesic_cmd(cfg: &Config, out: &mut Outputs) -> Result<Value, CliError> {
    let s: &GeodesicSection = section(&cfg.geodesic, "geodesic")?;
    let data = load(&s.data)?;
    let latent = match (&data.sim, &s.latent_path) {
        (Some((_, z)), None) => latent_points(z),
        (None, Some(path)) => {
            if !path.is_file() {
                return Err(config_err(format!("latent file {} does not exist", path.display())));
            }
            read_matrix_path(path)?
        }
        (Some(_), Some(_)) => return Err(config_err("`latent_path` is only for file data")),
        (None, None) => return Err(config_err("file data needs `latent_path`")),
    };
    if latent.rows() != data.y.rows() {
        return Err(config_err(format!(
            "latent file has {} rows, data has {}",
            latent.rows(),
            data.y.rows()
        )));
    }
    let scores = pc_scores(&data.y, s.r, false)?.normalized_scores();
    let dz = graph_geodesics(&neighbor_graph(&latent, s.graph)?, &latent, s.fallback)?;
    let ds = graph_geodesics(&neighbor_graph(&scores, s.graph)?, &scores, s.fallback)?;
    let slope = isometry_slope(&dz, &ds)?;
    let n = dz.rows();
    out.write("geodesics.csv", |w| {
        write_table(
            w,
            &["i", "j", "latent_geodesic", "score_geodesic"],
            (0..n).flat_map(|i| {
                let (dz, ds) = (&dz, &ds);
                (i + 1..n).map(move |j| {
                    vec![i.to_string(), j.to_string(), dz[(i, j)].to_string(), ds[(i, j)].to_string()]
                })
            }),
        )
    })?;
    Ok(json!({ "slope": slope }))
}

fn targets_for(spec: &TargetSpec, data: &Data) -> Result<Targets, CliError> {
    let z = || {
        data.sim
            .as_ref()
            .map(|(_, z)| z)
            .ok_or_else(|| config_err("derived targets need simulated data"))
    };
    let t = match spec {
        TargetSpec::File { path, task } => {
            if !path.is_file() {
                return Err(config_err(format!("target file {} does not exist", path.display())));
            }
            let m = read_matrix_path(path)?;
            match task {
                Task::Regression => Targets::regression(m),
                Task::Classification => {
                    if m.cols() != 1 {
                        return Err(config_err("class labels must be a single column"));
                    }
                    let labels = m
                        .as_slice()
                        .iter()
                        .map(|&v| {
                            if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
                                Ok(v as usize)
                            } else {
                                Err(config_err(format!("label {v} is not a non-negative integer")))
                            }
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Targets::Classification { labels }
                }
            }
        }
        TargetSpec::Atoms => {
            let labels = z()?
                .atoms()
                .ok_or_else(|| config_err("`atoms` targets need a discrete latent space"))?
                .to_vec();
            Targets::Classification { labels }
        }
        TargetSpec::TorusAngles => {
            let (az, el) = torus_angles(z()?)?;
            let values = Matrix::from_fn(az.len(), 2, |i, c| if c == 0 { az[i] } else { el[i] });
            Targets::Regression {
                values,
                names: vec!["azimuth".into(), "elevation".into()],
            }
        }
    };
    if t.len() != data.y.rows() {
        return Err(config_err(format!("{} targets for {} rows", t.len(), data.y.rows())));
    }
    Ok(t)
}

/// Grid value with the smallest mean error for each response.
pub fn curve_minima(curve: &ErrorCurve) -> Value {
    let mut names: Vec<Option<String>> = Vec::new();
    for row in &curve.rows {
        if !names.contains(&row.target) {
            names.push(row.target.clone());
        }
    }
    let mins: Vec<Value> = names
        .iter()
        .map(|name| {
            let best = curve
                .for_target(name.as_deref())
                .into_iter()
                .min_by(|a, b| a.mean.total_cmp(&b.mean).then(a.r.cmp(&b.r)));
            json!({ "target": name, "r": best.map(|b| b.r), "mean": best.map(|b| b.mean) })
        })
        .collect();
    Value::Array(mins)
}

pub fn predict_cmd(cfg: &Config, seed: u64, out: &mut Outputs) -> Result<Value, CliError> {
    let s: &PredictSection = section(&cfg.predict, "predict")?;
    let data = load(&s.data)?;
    let targets = targets_for(&s.targets, &data)?;
    let curve = error_curve(&data.y, &targets, &s.curve.options(seed))?;
    out.write("error_curve.csv", |w| Ok(curve.write_csv(w)?))?;
    Ok(json!({ "metric": curve.metric.name(), "minima": curve_minima(&curve) }))
}
