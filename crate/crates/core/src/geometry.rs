//! Neighbour graphs, graph geodesics and the isometry slope.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LmsError, Result};
use crate::linalg::{pairwise_distances, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GraphMode {
    /// Each point joined to its k nearest neighbours, then symmetrised.
    Knn { k: usize },
    /// Pairs within the q-quantile of all pairwise distances.
    EpsQuantile { q: f64 },
}

impl Default for GraphMode {
    fn default() -> Self {
        GraphMode::Knn { k: 5 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Disconnected pairs get their Euclidean distance.
    #[default]
    Euclidean,
    Infinite,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedGraph {
    pub n: usize,
    /// `(i, j, w)` with `i < j`, each pair once.
    pub edges: Vec<(usize, usize, f64)>,
    pub construction: GraphMode,
}

impl WeightedGraph {
    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, w) in &self.edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        adj
    }

    /// Number of connected components.
    pub fn components(&self) -> usize {
        let mut uf = crate::tda::UnionFind::new(self.n);
        let mut count = self.n;
        for &(i, j, _) in &self.edges {
            if uf.union(i, j) {
                count -= 1;
            }
        }
        count
    }
}

/// Linear-interpolation quantile (inclusive) of unsorted values.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn neighbor_graph(points: &Matrix, mode: GraphMode) -> Result<WeightedGraph> {
    let n = points.rows();
    if n < 2 {
        return Err(LmsError::InvalidArgument("a graph needs at least 2 points".into()));
    }
    let d = pairwise_distances(points);
    if d.max_abs() == 0.0 {
        return Err(LmsError::InvalidArgument("all points coincide".into()));
    }
    let mut edges = Vec::new();
    match mode {
        GraphMode::Knn { k } => {
            if k == 0 || k >= n {
                return Err(LmsError::InvalidArgument(format!("k={k} for {n} points")));
            }
            let mut selected = vec![false; n * n];
            for i in 0..n {
                let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                others.sort_by(|&a, &b| d[(i, a)].total_cmp(&d[(i, b)]).then(a.cmp(&b)));
                for &j in &others[..k] {
                    let (a, b) = (i.min(j), i.max(j));
                    selected[a * n + b] = true;
                }
            }
            for a in 0..n {
                for b in (a + 1)..n {
                    if selected[a * n + b] {
                        edges.push((a, b, d[(a, b)]));
                    }
                }
            }
        }
        GraphMode::EpsQuantile { q } => {
            if !(q > 0.0 && q <= 1.0) {
                return Err(LmsError::InvalidArgument(format!("quantile {q} outside (0, 1]")));
            }
            let mut all = Vec::with_capacity(n * (n - 1) / 2);
            for a in 0..n {
                for b in (a + 1)..n {
                    all.push(d[(a, b)]);
                }
            }
            let eps = quantile(&all, q);
            for a in 0..n {
                for b in (a + 1)..n {
                    if d[(a, b)] <= eps {
                        edges.push((a, b, d[(a, b)]));
                    }
                }
            }
        }
    }
    Ok(WeightedGraph {
        n,
        edges,
        construction: mode,
    })
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Frontier(0.0, source));
    while let Some(Frontier(du, u)) = heap.pop() {
        if du > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = du + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Frontier(nd, v));
            }
        }
    }
    dist
}

/// All-pairs shortest-path distances over the graph.
pub fn graph_geodesics(graph: &WeightedGraph, points: &Matrix, fallback: Fallback) -> Result<Matrix> {
    let n = graph.n;
    if points.rows() != n {
        return Err(LmsError::Shape(format!(
            "graph on {n} nodes, {} points",
            points.rows()
        )));
    }
    let adj = graph.adjacency();
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
    let mut out = Matrix::from_fn(n, n, |i, j| rows[i][j]);
    let eucl = matches!(fallback, Fallback::Euclidean).then(|| pairwise_distances(points));
    for i in 0..n {
        out[(i, i)] = 0.0;
        for j in (i + 1)..n {
            let mut v = out[(i, j)].min(out[(j, i)]);
            if v.is_infinite() {
                if let Some(e) = &eucl {
                    v = e[(i, j)];
                }
            }
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Least-squares slope through the origin of target against source
/// distances, over finite upper-triangle pairs.
pub fn isometry_slope(source: &Matrix, target: &Matrix) -> Result<f64> {
    if source.shape() != target.shape() || !source.is_square() {
        return Err(LmsError::Shape("distance matrices must be square and conform".into()));
    }
    let n = source.rows();
    let (mut st, mut ss) = (0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let (s, t) = (source[(i, j)], target[(i, j)]);
            if s.is_finite() && t.is_finite() {
                st += s * t;
                ss += s * s;
            }
        }
    }
    if ss == 0.0 {
        return Err(LmsError::InvalidArgument("source distances are all zero".into()));
    }
    Ok(st / ss)
}

/// Upper-triangle `(source, target)` pairs, for scatter export.
pub fn distance_pairs(source: &Matrix, target: &Matrix) -> Vec<(f64, f64)> {
    let n = source.rows();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((source[(i, j)], target[(i, j)]));
        }
    }
    out
}
