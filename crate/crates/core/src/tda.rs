//! Vietoris–Rips persistence in dimensions 0 and 1, bottleneck distance and
//! feature counts.
//!
//! H0 comes from union-find over the sorted edges. H1 is computed by reducing
//! the coboundary matrix of the edges in reverse filtration order, skipping
//! the edges already paired in H0 (clearing). The resulting pairs are the same
//! as those of the boundary-matrix reduction, and the coboundary form avoids
//! reducing the millions of triangles that create 2-cycles once every edge of
//! a dense cloud is present.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::io::Write;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{LmsError, Result};
use crate::linalg::{pairwise_distances, Matrix};
use crate::rng::{kind_rng, StreamKind};
use crate::transport::bottleneck_feasible;

/// Largest cloud accepted for H1.
pub const DEFAULT_H1_CAP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePoint {
    pub dim: u8,
    pub birth: f64,
    pub death: f64,
    /// Still alive at `max_scale`; `death` is then `max_scale`.
    pub flagged: bool,
}

impl PersistencePoint {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub points: Vec<PersistencePoint>,
    pub max_scale: f64,
}

impl PersistenceDiagram {
    pub fn dimension(&self, dim: u8) -> impl Iterator<Item = &PersistencePoint> {
        self.points.iter().filter(move |p| p.dim == dim)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["dim", "birth", "death", "flagged"])?;
        for p in &self.points {
            w.write_record([
                p.dim.to_string(),
                p.birth.to_string(),
                p.death.to_string(),
                p.flagged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

const NO_EDGE: u32 = u32::MAX;

/// Edges of the Rips complex up to `max_scale`, in filtration order.
struct EdgeTable {
    n: usize,
    /// `(length, i, j)` sorted by length then vertices.
    edges: Vec<(f64, u32, u32)>,
    /// `n × n` lookup from vertex pair to edge id.
    id: Vec<u32>,
}

impl EdgeTable {
    fn new(dist: &Matrix, max_scale: f64) -> Self {
        let n = dist.rows();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dist[(i, j)];
                if d <= max_scale {
                    edges.push((d, i as u32, j as u32));
                }
            }
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut id = vec![NO_EDGE; n * n];
        for (e, &(_, i, j)) in edges.iter().enumerate() {
            id[i as usize * n + j as usize] = e as u32;
            id[j as usize * n + i as usize] = e as u32;
        }
        EdgeTable { n, edges, id }
    }

    /// Triangles containing edge `e`. A triangle is keyed by its latest edge
    /// and the opposite vertex, so key order refines the filtration.
    fn coboundary(&self, e: u32, out: &mut Vec<u64>) {
        out.clear();
        let (_, i, j) = self.edges[e as usize];
        let (i, j) = (i as usize, j as usize);
        let n = self.n;
        for k in 0..n {
            if k == i || k == j {
                continue;
            }
            let (a, b) = (self.id[i * n + k], self.id[j * n + k]);
            if a == NO_EDGE || b == NO_EDGE {
                continue;
            }
            let key = if e > a && e > b {
                (e as u64) << 32 | k as u64
            } else if a > b {
                (a as u64) << 32 | j as u64
            } else {
                (b as u64) << 32 | i as u64
            };
            out.push(key);
        }
    }

    fn triangle_value(&self, key: u64) -> f64 {
        self.edges[(key >> 32) as usize].0
    }
}

/// Pops the smallest entry with odd multiplicity and leaves it in the heap.
fn heap_pivot(heap: &mut BinaryHeap<Reverse<u64>>) -> Option<u64> {
    loop {
        let Reverse(t) = heap.pop()?;
        let mut count = 1;
        while heap.peek() == Some(&Reverse(t)) {
            heap.pop();
            count += 1;
        }
        if count % 2 == 1 {
            heap.push(Reverse(t));
            return Some(t);
        }
    }
}

/// Symmetric difference of two edge sets.
fn xor_into(acc: &mut Vec<u32>, other: &[u32]) {
    acc.extend_from_slice(other);
    acc.sort_unstable();
    let mut out = Vec::with_capacity(acc.len());
    let mut i = 0;
    while i < acc.len() {
        if i + 1 < acc.len() && acc[i] == acc[i + 1] {
            i += 2;
        } else {
            out.push(acc[i]);
            i += 1;
        }
    }
    *acc = out;
}

pub fn rips_persistence(points: &Matrix, max_scale: f64, max_dim: u8) -> Result<PersistenceDiagram> {
    rips_persistence_capped(points, max_scale, max_dim, DEFAULT_H1_CAP)
}

pub fn rips_persistence_capped(
    points: &Matrix,
    max_scale: f64,
    max_dim: u8,
    cap: usize,
) -> Result<PersistenceDiagram> {
    let n = points.rows();
    if n == 0 {
        return Err(LmsError::InvalidArgument("empty point cloud".into()));
    }
    if !(max_scale > 0.0 && max_scale.is_finite()) {
        return Err(LmsError::InvalidArgument(format!("max_scale {max_scale}")));
    }
    if max_dim > 1 {
        return Err(LmsError::InvalidArgument("only dimensions 0 and 1 are supported".into()));
    }
    if max_dim == 1 && n > cap {
        return Err(LmsError::CapExceeded { n, cap });
    }
    for i in 0..n {
        for (j, v) in points.row(i).iter().enumerate() {
            if !v.is_finite() {
                return Err(LmsError::NonFinite { row: i, col: j });
            }
        }
    }
    let dist = pairwise_distances(points);
    let table = EdgeTable::new(&dist, max_scale);
    let mut diagram = Vec::new();

    let mut uf = UnionFind::new(n);
    let mut cleared = vec![false; table.edges.len()];
    for (e, &(d, i, j)) in table.edges.iter().enumerate() {
        if uf.union(i as usize, j as usize) {
            cleared[e] = true;
            diagram.push(PersistencePoint {
                dim: 0,
                birth: 0.0,
                death: d,
                flagged: false,
            });
        }
    }
    for v in 0..n {
        if uf.find(v) == v {
            diagram.push(PersistencePoint {
                dim: 0,
                birth: 0.0,
                death: max_scale,
                flagged: true,
            });
        }
    }

    if max_dim == 1 {
        diagram.extend(h1_pairs(&table, &cleared, max_scale));
    }
    Ok(PersistenceDiagram {
        points: diagram,
        max_scale,
    })
}

fn h1_pairs(table: &EdgeTable, cleared: &[bool], max_scale: f64) -> Vec<PersistencePoint> {
    let mut out = Vec::new();
    let mut pivot_owner: HashMap<u64, u32> = HashMap::new();
    let mut reduction: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut cob = Vec::new();
    let mut heap = BinaryHeap::new();
    for e in (0..table.edges.len() as u32).rev() {
        if cleared[e as usize] {
            continue;
        }
        let birth = table.edges[e as usize].0;
        table.coboundary(e, &mut cob);
        let pivot = match cob.iter().min() {
            Some(&t) if !pivot_owner.contains_key(&t) => Some((t, vec![e])),
            None => None,
            Some(_) => {
                heap.clear();
                heap.extend(cob.iter().map(|&t| Reverse(t)));
                let mut combo = vec![e];
                loop {
                    match heap_pivot(&mut heap) {
                        None => break None,
                        Some(t) => match pivot_owner.get(&t) {
                            None => break Some((t, combo)),
                            Some(&owner) => {
                                let other = &reduction[&owner];
                                for &f in other {
                                    table.coboundary(f, &mut cob);
                                    heap.extend(cob.iter().map(|&t| Reverse(t)));
                                }
                                xor_into(&mut combo, other);
                            }
                        },
                    }
                }
            }
        };
        match pivot {
            Some((t, combo)) => {
                let death = table.triangle_value(t);
                if death > birth {
                    out.push(PersistencePoint {
                        dim: 1,
                        birth,
                        death,
                        flagged: false,
                    });
                }
                pivot_owner.insert(t, e);
                reduction.insert(e, combo);
            }
            None => out.push(PersistencePoint {
                dim: 1,
                birth,
                death: max_scale,
                flagged: true,
            }),
        }
    }
    out.reverse();
    out
}

/// Sorted row indices for a seed-keyed subsample of at most `cap` rows.
pub fn subsample_indices(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = kind_rng(seed, StreamKind::Subsample, 0);
    let mut idx = index::sample(&mut rng, n, cap).into_vec();
    idx.sort_unstable();
    idx
}

/// Exact bottleneck distance between the dimension-`dim` parts of two
/// diagrams. Flagged points are matched at their recorded death.
pub fn bottleneck(a: &PersistenceDiagram, b: &PersistenceDiagram, dim: u8) -> f64 {
    let pa: Vec<(f64, f64)> = a.dimension(dim).map(|p| (p.birth, p.death)).collect();
    let pb: Vec<(f64, f64)> = b.dimension(dim).map(|p| (p.birth, p.death)).collect();
    bottleneck_points(&pa, &pb)
}

/// Bottleneck distance between two finite multisets of (birth, death) pairs.
pub fn bottleneck_points(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (k, l) = (a.len(), b.len());
    let size = k + l;
    if size == 0 {
        return 0.0;
    }
    let diag = |p: &(f64, f64)| (p.1 - p.0) / 2.0;
    let mut costs = Matrix::from_fn(size, size, |_, _| f64::INFINITY);
    for i in 0..k {
        for j in 0..l {
            costs[(i, j)] = (a[i].0 - b[j].0).abs().max((a[i].1 - b[j].1).abs());
        }
        costs[(i, l + i)] = diag(&a[i]);
    }
    for j in 0..l {
        costs[(k + j, j)] = diag(&b[j]);
        for i in 0..k {
            costs[(k + j, l + i)] = 0.0;
        }
    }
    let mut cand: Vec<f64> = costs.as_slice().iter().copied().filter(|c| c.is_finite()).collect();
    cand.sort_by(f64::total_cmp);
    cand.dedup();
    let (mut lo, mut hi) = (0, cand.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if bottleneck_feasible(&costs, cand[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    cand[lo]
}

/// Points with persistence above `cutoff`, as `(beta0, beta1)`.
pub fn count_features(diagram: &PersistenceDiagram, cutoff: f64) -> (usize, usize) {
    let count = |d| diagram.dimension(d).filter(|p| p.persistence() > cutoff).count();
    (count(0), count(1))
}
