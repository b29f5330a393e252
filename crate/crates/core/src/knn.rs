//! k-nearest-neighbour prediction on PC scores and error-versus-dimension
//! curves over random train/test splits.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::pc_scores;
use crate::error::{LmsError, Result};
use crate::geometry::quantile;
use crate::linalg::{sym_eig_top, Matrix};
use crate::rng::{kind_rng, StreamKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Targets {
    /// One column per response variable.
    Regression { values: Matrix, names: Vec<String> },
    Classification { labels: Vec<usize> },
}

impl Targets {
    pub fn regression(values: Matrix) -> Self {
        let names = (1..=values.cols()).map(|k| format!("y{k}")).collect();
        Targets::Regression { values, names }
    }

    pub fn len(&self) -> usize {
        match self {
            Targets::Regression { values, .. } => values.rows(),
            Targets::Classification { labels } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Regression { values, names } => Targets::Regression {
                values: values.select_rows(idx),
                names: names.clone(),
            },
            Targets::Classification { labels } => Targets::Classification {
                labels: idx.iter().map(|&i| labels[i]).collect(),
            },
        }
    }

    pub fn metric(&self) -> Metric {
        match self {
            Targets::Regression { .. } => Metric::OneMinusR2,
            Targets::Classification { .. } => Metric::MisclassificationRate,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SupervisedSet {
    pub features: Matrix,
    pub targets: Targets,
}

impl SupervisedSet {
    pub fn new(features: Matrix, targets: Targets) -> Result<Self> {
        if features.rows() != targets.len() {
            return Err(LmsError::Shape(format!(
                "{} feature rows, {} targets",
                features.rows(),
                targets.len()
            )));
        }
        Ok(SupervisedSet { features, targets })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Regression(Matrix),
    Classification(Vec<usize>),
}

/// Indices of the `k` nearest train rows by squared distance, ties by index.
fn nearest(sq: &[f64], k: usize, scratch: &mut Vec<usize>) -> Vec<usize> {
    scratch.clear();
    scratch.extend(0..sq.len());
    let cmp = |a: &usize, b: &usize| sq[*a].total_cmp(&sq[*b]).then(a.cmp(b));
    if k < sq.len() {
        scratch.select_nth_unstable_by(k - 1, cmp);
    }
    let mut out = scratch[..k].to_vec();
    out.sort_unstable_by(cmp);
    out
}

fn vote(labels: &[usize], idx: &[usize]) -> usize {
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for &i in idx {
        match counts.iter_mut().find(|c| c.0 == labels[i]) {
            Some(c) => c.1 += 1,
            None => counts.push((labels[i], 1)),
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|c| c.0)
        .unwrap_or(0)
}

fn predict_from(targets: &Targets, neighbours: &[Vec<usize>]) -> Predictions {
    match targets {
        Targets::Regression { values, .. } => {
            let t = values.cols();
            Predictions::Regression(Matrix::from_fn(neighbours.len(), t, |i, c| {
                let nb = &neighbours[i];
                nb.iter().map(|&j| values[(j, c)]).sum::<f64>() / nb.len() as f64
            }))
        }
        Targets::Classification { labels } => {
            Predictions::Classification(neighbours.iter().map(|nb| vote(labels, nb)).collect())
        }
    }
}

/// Uniform-weight kNN with Euclidean distance.
pub fn knn_predict(train: &SupervisedSet, test: &Matrix, k: usize) -> Result<Predictions> {
    let n = train.features.rows();
    if n == 0 {
        return Err(LmsError::InvalidArgument("empty training set".into()));
    }
    if k == 0 || k > n {
        return Err(LmsError::InvalidArgument(format!("k={k} with {n} training rows")));
    }
    if test.cols() != train.features.cols() {
        return Err(LmsError::Shape("test and train feature widths differ".into()));
    }
    let mut scratch = Vec::new();
    let neighbours: Vec<Vec<usize>> = test
        .row_iter()
        .map(|x| {
            let sq: Vec<f64> = train
                .features
                .row_iter()
                .map(|t| crate::linalg::sq_dist(x, t))
                .collect();
            nearest(&sq, k, &mut scratch)
        })
        .collect();
    Ok(predict_from(&train.targets, &neighbours))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    OneMinusR2,
    MisclassificationRate,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::OneMinusR2 => "one_minus_r2",
            Metric::MisclassificationRate => "misclassification_rate",
        }
    }
}

/// Test errors per target; `1 − SS_res/SS_tot` with `SS_tot` taken about
/// the training-target mean, or the misclassification rate.
pub fn test_errors(train: &Targets, test: &Targets, pred: &Predictions) -> Vec<f64> {
    match (train, test, pred) {
        (Targets::Regression { values: tr, .. }, Targets::Regression { values: te, .. }, Predictions::Regression(p)) => {
            (0..te.cols())
                .map(|c| {
                    let mean = tr.column(c).iter().sum::<f64>() / tr.rows() as f64;
                    let (mut res, mut tot) = (0.0, 0.0);
                    for i in 0..te.rows() {
                        res += (te[(i, c)] - p[(i, c)]).powi(2);
                        tot += (te[(i, c)] - mean).powi(2);
                    }
                    if tot > 0.0 {
                        res / tot
                    } else if res == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                })
                .collect()
        }
        (_, Targets::Classification { labels }, Predictions::Classification(p)) => {
            let wrong = labels.iter().zip(p).filter(|(a, b)| a != b).count();
            vec![wrong as f64 / labels.len() as f64]
        }
        _ => vec![f64::NAN],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub r: usize,
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
    /// Response name for regression targets.
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub rows: Vec<CurveRow>,
    pub metric: Metric,
}

impl ErrorCurve {
    /// Rows for one response, in grid order.
    pub fn for_target(&self, name: Option<&str>) -> Vec<&CurveRow> {
        self.rows.iter().filter(|r| r.target.as_deref() == name).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let named = self.rows.iter().any(|r| r.target.is_some());
        let mut header = vec!["r", "metric", "mean", "p5", "p95"];
        if named {
            header.push("target_name");
        }
        out.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                row.r.to_string(),
                self.metric.name().to_string(),
                row.mean.to_string(),
                row.p5.to_string(),
                row.p95.to_string(),
            ];
            if named {
                rec.push(row.target.clone().unwrap_or_default());
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveOptions {
    pub r_grid: Vec<usize>,
    pub n_splits: usize,
    /// Training fraction of each split.
    pub split_frac: f64,
    pub k: usize,
    pub seed: u64,
    pub centered: bool,
    /// Fit the principal components on the training rows of each split and
    /// project the test rows, instead of embedding all rows at once.
    pub train_only_embedding: bool,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            r_grid: (1..=10).collect(),
            n_splits: 200,
            split_frac: 0.7,
            k: 5,
            seed: 0,
            centered: false,
            train_only_embedding: false,
        }
    }
}

/// Row split for split number `s`: `(train, test)`.
pub fn split_indices(n: usize, frac: f64, seed: u64, s: usize) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut kind_rng(seed, StreamKind::Split, s as u64));
    let n_train = ((frac * n as f64).round() as usize).clamp(1, n - 1);
    let test = idx.split_off(n_train);
    (idx, test)
}

/// Train scores and projected test scores from the training rows alone.
pub fn train_test_scores(
    y_train: &Matrix,
    y_test: &Matrix,
    r: usize,
    centered: bool,
) -> Result<(Matrix, Matrix)> {
    let (mut tr, mut te) = (y_train.clone(), y_test.clone());
    if centered {
        let p = tr.cols();
        let means: Vec<f64> = (0..p)
            .map(|j| tr.column(j).iter().sum::<f64>() / tr.rows() as f64)
            .collect();
        for m in [&mut tr, &mut te] {
            for i in 0..m.rows() {
                for (v, mu) in m.row_mut(i).iter_mut().zip(&means) {
                    *v -= mu;
                }
            }
        }
    }
    let n = tr.rows();
    if r == 0 || r > n.min(tr.cols()) {
        return Err(LmsError::InvalidArgument(format!("r={r} for a {}×{} training block", n, tr.cols())));
    }
    // Right singular vectors V = Yᵀ U μ^{-1/2} from the row Gram matrix.
    let e = sym_eig_top(&tr.row_gram(), r)?;
    let lmax = e.values[0].max(0.0);
    let cross = te.matmul(&tr.transpose())?;
    let mut train_scores = Matrix::zeros(n, r);
    let mut test_scores = Matrix::zeros(te.rows(), r);
    for k in 0..r {
        let mu = e.values[k];
        if !(mu > crate::kernels::RANK_TOL * lmax) {
            continue;
        }
        let s = mu.sqrt();
        for i in 0..n {
            train_scores[(i, k)] = e.vectors[(i, k)] * s;
        }
        for i in 0..te.rows() {
            let v: f64 = (0..n).map(|a| cross[(i, a)] * e.vectors[(a, k)]).sum();
            test_scores[(i, k)] = v / s;
        }
    }
    Ok((train_scores, test_scores))
}

fn summarize(values: &mut [f64]) -> (f64, f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (mean, quantile(values, 0.05), quantile(values, 0.95))
}

/// Errors for every grid dimension on one split: `[grid][target]`.
fn split_errors(
    train_scores: &Matrix,
    test_scores: &Matrix,
    train_t: &Targets,
    test_t: &Targets,
    grid: &[usize],
    k: usize,
) -> Vec<Vec<f64>> {
    let (ntr, nte) = (train_scores.rows(), test_scores.rows());
    let mut sq = vec![0.0; nte * ntr];
    let mut out = Vec::with_capacity(grid.len());
    let mut done = 0;
    let mut scratch = Vec::new();
    for &r in grid {
        // Distances grow one coordinate at a time along the sorted grid.
        for c in done..r {
            for i in 0..nte {
                let x = test_scores[(i, c)];
                let row = &mut sq[i * ntr..(i + 1) * ntr];
                for (a, d) in row.iter_mut().enumerate() {
                    let diff = x - train_scores[(a, c)];
                    *d += diff * diff;
                }
            }
        }
        done = r;
        let neighbours: Vec<Vec<usize>> = (0..nte)
            .map(|i| nearest(&sq[i * ntr..(i + 1) * ntr], k, &mut scratch))
            .collect();
        out.push(test_errors(train_t, test_t, &predict_from(train_t, &neighbours)));
    }
    out
}

/// Mean and 5–95% band of the kNN test error against embedding dimension.
pub fn error_curve(y: &Matrix, targets: &Targets, opts: &CurveOptions) -> Result<ErrorCurve> {
    let n = y.rows();
    if targets.len() != n {
        return Err(LmsError::Shape(format!("{n} rows, {} targets", targets.len())));
    }
    if !(opts.split_frac > 0.0 && opts.split_frac < 1.0) {
        return Err(LmsError::InvalidArgument(format!("split fraction {}", opts.split_frac)));
    }
    if opts.n_splits == 0 || opts.r_grid.is_empty() {
        return Err(LmsError::InvalidArgument("empty grid or no splits".into()));
    }
    let mut grid = opts.r_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    let r_max = *grid.last().unwrap();
    let n_train = ((opts.split_frac * n as f64).round() as usize).clamp(1, n.saturating_sub(1));
    let limit = if opts.train_only_embedding { n_train } else { n };
    if grid[0] == 0 || r_max > limit.min(y.cols()) {
        return Err(LmsError::InvalidArgument(format!(
            "grid must lie in [1, {}]",
            limit.min(y.cols())
        )));
    }
    if opts.k == 0 || opts.k > n_train {
        return Err(LmsError::InvalidArgument(format!("k={} with {n_train} training rows", opts.k)));
    }
    let full = if opts.train_only_embedding {
        None
    } else {
        Some(pc_scores(y, r_max, opts.centered)?.scores)
    };
    let per_split: Vec<Vec<Vec<f64>>> = (0..opts.n_splits)
        .into_par_iter()
        .map(|s| -> Result<Vec<Vec<f64>>> {
            let (tr, te) = split_indices(n, opts.split_frac, opts.seed, s);
            let (str_, ste) = match &full {
                Some(sc) => (sc.select_rows(&tr), sc.select_rows(&te)),
                None => train_test_scores(&y.select_rows(&tr), &y.select_rows(&te), r_max, opts.centered)?,
            };
            Ok(split_errors(&str_, &ste, &targets.select(&tr), &targets.select(&te), &grid, opts.k))
        })
        .collect::<Result<_>>()?;

    let names: Vec<Option<String>> = match targets {
        Targets::Regression { names, .. } => names.iter().cloned().map(Some).collect(),
        Targets::Classification { .. } => vec![None],
    };
    let mut rows = Vec::new();
    for (t, name) in names.iter().enumerate() {
        for (g, &r) in grid.iter().enumerate() {
            let mut vals: Vec<f64> = per_split.iter().map(|s| s[g][t]).collect();
            let (mean, p5, p95) = summarize(&mut vals);
            rows.push(CurveRow {
                r,
                mean,
                p5,
                p95,
                target: name.clone(),
            });
        }
    }
    Ok(ErrorCurve {
        rows,
        metric: targets.metric(),
    })
}
