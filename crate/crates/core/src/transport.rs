//! Exact discrete optimal transport and bottleneck matching.
//!
//! The 1-Wasserstein distance is solved as an uncapacitated min-cost flow on
//! the complete bipartite graph by a primal network simplex. Masses are
//! scaled to integers first so that flows are exact and the strongly feasible
//! pivot rule rules out cycling.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{LmsError, Result};
use crate::linalg::{cross_distances, Matrix};

/// Integer scale used when weights are not small-denominator rationals.
const FALLBACK_SCALE: i64 = 1 << 40;
const MAX_DENOMINATOR: i64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCloud {
    pub points: Matrix,
    pub weights: Vec<f64>,
}

impl WeightedCloud {
    pub fn new(points: Matrix, weights: Vec<f64>) -> Result<Self> {
        if points.rows() == 0 {
            return Err(LmsError::InvalidArgument("empty point cloud".into()));
        }
        if weights.len() != points.rows() {
            return Err(LmsError::Shape(format!(
                "{} weights for {} points",
                weights.len(),
                points.rows()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(LmsError::InvalidArgument("weights must be non-negative".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(LmsError::InvalidArgument(format!("weights sum to {s}")));
        }
        Ok(WeightedCloud { points, weights })
    }

    pub fn uniform(points: Matrix) -> Result<Self> {
        let k = points.rows();
        WeightedCloud::new(points, vec![1.0 / k.max(1) as f64; k])
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportPlan {
    /// `(i, j, mass)` for every pair carrying positive mass.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

/// Exact 1-Wasserstein distance with Euclidean ground cost.
pub fn wasserstein1(a: &WeightedCloud, b: &WeightedCloud) -> Result<(f64, TransportPlan)> {
    if a.is_empty() || b.is_empty() {
        return Err(LmsError::InvalidArgument("empty point cloud".into()));
    }
    let costs = cross_distances(&a.points, &b.points)?;
    let plan = transport_with_costs(&costs, &a.weights, &b.weights)?;
    Ok((plan.cost, plan))
}

/// Optimal plan for an explicit cost matrix and two weight vectors.
pub fn transport_with_costs(costs: &Matrix, wa: &[f64], wb: &[f64]) -> Result<TransportPlan> {
    if costs.rows() != wa.len() || costs.cols() != wb.len() {
        return Err(LmsError::Shape(format!(
            "cost matrix {:?} for {} and {} weights",
            costs.shape(),
            wa.len(),
            wb.len()
        )));
    }
    let (ma, mb, scale) = integer_masses(wa, wb)?;
    let flows = min_cost_flow(costs, &ma, &mb)?;
    let mut cost = 0.0;
    let mut out = Vec::with_capacity(flows.len());
    for (i, j, f) in flows {
        let m = f as f64 / scale as f64;
        cost += m * costs[(i, j)];
        out.push((i, j, m));
    }
    Ok(TransportPlan { flows: out, cost })
}

/// Best rational approximation with denominator at most `MAX_DENOMINATOR`.
fn rationalize(x: f64) -> Option<(i64, i64)> {
    if x == 0.0 {
        return Some((0, 1));
    }
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a > 1e12 {
            break;
        }
        let ai = a as i64;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2 > MAX_DENOMINATOR {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= 1e-13 * x.max(1.0) {
            return Some((h1, k1));
        }
        let frac = v - a;
        if frac < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    if k1 > 0 && (x - h1 as f64 / k1 as f64).abs() <= 1e-13 * x.max(1.0) {
        Some((h1, k1))
    } else {
        None
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Integer masses with equal totals, and the common scale.
fn integer_masses(wa: &[f64], wb: &[f64]) -> Result<(Vec<i64>, Vec<i64>, i64)> {
    let ta: f64 = wa.iter().sum();
    let tb: f64 = wb.iter().sum();
    if wa.iter().chain(wb).any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(LmsError::InvalidArgument("weights must be non-negative".into()));
    }
    if (ta - tb).abs() > 1e-12 * ta.max(tb) || !(ta > 0.0) {
        return Err(LmsError::InvalidArgument(format!("mass mismatch: {ta} vs {tb}")));
    }
    let exact = (|| {
        let ra: Vec<(i64, i64)> = wa.iter().map(|&w| rationalize(w / ta)).collect::<Option<_>>()?;
        let rb: Vec<(i64, i64)> = wb.iter().map(|&w| rationalize(w / tb)).collect::<Option<_>>()?;
        let mut lcm = 1i64;
        for &(_, q) in ra.iter().chain(&rb) {
            lcm = (lcm / gcd(lcm, q)).checked_mul(q)?;
            if lcm > FALLBACK_SCALE {
                return None;
            }
        }
        let ma: Vec<i64> = ra.iter().map(|&(p, q)| p * (lcm / q)).collect();
        let mb: Vec<i64> = rb.iter().map(|&(p, q)| p * (lcm / q)).collect();
        (ma.iter().sum::<i64>() == lcm && mb.iter().sum::<i64>() == lcm).then_some((ma, mb, lcm))
    })();
    if let Some(v) = exact {
        return Ok(v);
    }
    Ok((
        largest_remainder(wa, ta, FALLBACK_SCALE),
        largest_remainder(wb, tb, FALLBACK_SCALE),
        FALLBACK_SCALE,
    ))
}

fn largest_remainder(w: &[f64], total: f64, scale: i64) -> Vec<i64> {
    let raw: Vec<f64> = w.iter().map(|x| x / total * scale as f64).collect();
    let mut out: Vec<i64> = raw.iter().map(|x| x.floor() as i64).collect();
    let mut short = scale - out.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&i, &j| (raw[j] - raw[j].floor()).total_cmp(&(raw[i] - raw[i].floor())));
    let mut k = 0;
    while short > 0 {
        out[order[k % order.len()]] += 1;
        short -= 1;
        k += 1;
    }
    while short < 0 {
        let i = order[order.len() - 1 - (k % order.len())];
        if out[i] > 0 {
            out[i] -= 1;
            short += 1;
        }
        k += 1;
    }
    out
}

const UP: i8 = 1;
const DOWN: i8 = -1;

struct Simplex<'a> {
    costs: &'a Matrix,
    na: usize,
    nb: usize,
    root: usize,
    // Arc data; real arcs first (i * nb + j), then one artificial per node.
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<i64>,
    in_tree: Vec<bool>,
    // Tree data per node.
    parent: Vec<usize>,
    pred: Vec<usize>,
    dir: Vec<i8>,
    depth: Vec<usize>,
    children: Vec<Vec<usize>>,
    pi: Vec<f64>,
    eps: f64,
}

impl<'a> Simplex<'a> {
    fn real_arcs(&self) -> usize {
        self.na * self.nb
    }

    fn arc_endpoints(&self, e: usize) -> (usize, usize, f64) {
        if e < self.real_arcs() {
            let (i, j) = (e / self.nb, e % self.nb);
            (i, self.na + j, self.costs[(i, j)])
        } else {
            (self.source[e - self.real_arcs()], self.target[e - self.real_arcs()], self.cost[e - self.real_arcs()])
        }
    }

    fn reduced_cost(&self, e: usize) -> f64 {
        let (s, t, c) = self.arc_endpoints(e);
        c + self.pi[s] - self.pi[t]
    }

    fn new(costs: &'a Matrix, ma: &[i64], mb: &[i64]) -> Self {
        let (na, nb) = (ma.len(), mb.len());
        let nodes = na + nb;
        let root = nodes;
        let max_cost = costs.as_slice().iter().fold(0.0f64, |m, &c| m.max(c.abs()));
        let art = (max_cost + 1.0) * (nodes as f64);
        let mut s = Simplex {
            costs,
            na,
            nb,
            root,
            source: Vec::with_capacity(nodes),
            target: Vec::with_capacity(nodes),
            cost: Vec::with_capacity(nodes),
            flow: vec![0; na * nb + nodes],
            in_tree: vec![false; na * nb + nodes],
            parent: vec![root; nodes + 1],
            pred: vec![usize::MAX; nodes + 1],
            dir: vec![UP; nodes + 1],
            depth: vec![1; nodes + 1],
            children: vec![Vec::new(); nodes + 1],
            pi: vec![0.0; nodes + 1],
            eps: 1e-11 * max_cost.max(f64::MIN_POSITIVE),
        };
        s.depth[root] = 0;
        for u in 0..nodes {
            let e = na * nb + u;
            let supply = if u < na { ma[u] } else { -mb[u - na] };
            s.pred[u] = e;
            s.in_tree[e] = true;
            s.children[root].push(u);
            if supply >= 0 {
                s.dir[u] = UP;
                s.source.push(u);
                s.target.push(root);
                s.cost.push(0.0);
                s.flow[e] = supply;
                s.pi[u] = 0.0;
            } else {
                s.dir[u] = DOWN;
                s.source.push(root);
                s.target.push(u);
                s.cost.push(art);
                s.flow[e] = -supply;
                s.pi[u] = art;
            }
        }
        s
    }

    /// Block-search pricing starting at `*next`.
    fn find_entering(&self, next: &mut usize) -> Option<usize> {
        let m = self.real_arcs();
        let block = ((m as f64).sqrt().ceil() as usize).max(10);
        let mut best = None;
        let mut best_rc = -self.eps;
        let mut seen = 0;
        let mut e = *next;
        for _ in 0..m {
            if !self.in_tree[e] {
                let rc = self.reduced_cost(e);
                if rc < best_rc {
                    best_rc = rc;
                    best = Some(e);
                }
            }
            e += 1;
            if e == m {
                e = 0;
            }
            seen += 1;
            if seen == block {
                if best.is_some() {
                    *next = e;
                    return best;
                }
                seen = 0;
            }
        }
        *next = e;
        best
    }

    fn join(&self, mut u: usize, mut v: usize) -> usize {
        while self.depth[u] > self.depth[v] {
            u = self.parent[u];
        }
        while self.depth[v] > self.depth[u] {
            v = self.parent[v];
        }
        while u != v {
            u = self.parent[u];
            v = self.parent[v];
        }
        u
    }

    fn pivot(&mut self, e_in: usize) {
        let (first, second, _) = self.arc_endpoints(e_in);
        let join = self.join(first, second);
        let mut delta = i64::MAX;
        let mut u_out = usize::MAX;
        let mut side = 0;
        let mut u = first;
        while u != join {
            let d = if self.dir[u] == UP { self.flow[self.pred[u]] } else { i64::MAX };
            if d < delta {
                delta = d;
                u_out = u;
                side = 1;
            }
            u = self.parent[u];
        }
        u = second;
        while u != join {
            let d = if self.dir[u] == DOWN { self.flow[self.pred[u]] } else { i64::MAX };
            if d <= delta {
                delta = d;
                u_out = u;
                side = 2;
            }
            u = self.parent[u];
        }
        debug_assert!(side != 0, "uncapacitated cycle must be bounded");

        if delta > 0 {
            self.flow[e_in] += delta;
            let mut u = first;
            while u != join {
                let e = self.pred[u];
                self.flow[e] -= i64::from(self.dir[u]) * delta;
                u = self.parent[u];
            }
            u = second;
            while u != join {
                let e = self.pred[u];
                self.flow[e] += i64::from(self.dir[u]) * delta;
                u = self.parent[u];
            }
        }

        let (u_in, v_in) = if side == 1 { (first, second) } else { (second, first) };
        let e_out = self.pred[u_out];
        self.in_tree[e_out] = false;
        self.in_tree[e_in] = true;

        // Reverse the tree path u_in → u_out, then hang u_in below v_in.
        let mut path = vec![u_in];
        while *path.last().unwrap() != u_out {
            let w = self.parent[*path.last().unwrap()];
            path.push(w);
        }
        let old_parent_out = self.parent[u_out];
        remove_child(&mut self.children[old_parent_out], u_out);
        let old_pred: Vec<usize> = path.iter().map(|&w| self.pred[w]).collect();
        let old_dir: Vec<i8> = path.iter().map(|&w| self.dir[w]).collect();
        for k in (1..path.len()).rev() {
            let (lower, upper) = (path[k - 1], path[k]);
            remove_child(&mut self.children[upper], lower);
            self.parent[upper] = lower;
            self.pred[upper] = old_pred[k - 1];
            self.dir[upper] = -old_dir[k - 1];
            self.children[lower].push(upper);
        }
        self.parent[u_in] = v_in;
        self.pred[u_in] = e_in;
        let (src, _, _) = self.arc_endpoints(e_in);
        self.dir[u_in] = if src == u_in { UP } else { DOWN };
        self.children[v_in].push(u_in);

        let rc = self.reduced_cost(e_in);
        let shift = if src == u_in { -rc } else { rc };
        let base = self.depth[v_in] + 1;
        let mut stack = vec![(u_in, base)];
        while let Some((w, d)) = stack.pop() {
            self.pi[w] += shift;
            self.depth[w] = d;
            for &c in &self.children[w] {
                stack.push((c, d + 1));
            }
        }
    }

    /// Recomputes potentials from the tree so reduced costs of tree arcs are 0.
    fn refresh_potentials(&mut self) {
        let mut stack = vec![self.root];
        self.pi[self.root] = 0.0;
        while let Some(w) = stack.pop() {
            for k in 0..self.children[w].len() {
                let c = self.children[w][k];
                let (s, _, cost) = self.arc_endpoints(self.pred[c]);
                // cost + pi[s] − pi[t] = 0.
                self.pi[c] = if s == c { self.pi[w] - cost } else { self.pi[w] + cost };
                stack.push(c);
            }
        }
    }
}

fn remove_child(list: &mut Vec<usize>, c: usize) {
    if let Some(pos) = list.iter().position(|&x| x == c) {
        list.swap_remove(pos);
    }
}

/// Min-cost flow from supplies `ma` to demands `mb`; returns positive flows.
fn min_cost_flow(costs: &Matrix, ma: &[i64], mb: &[i64]) -> Result<Vec<(usize, usize, i64)>> {
    if ma.iter().sum::<i64>() != mb.iter().sum::<i64>() {
        return Err(LmsError::InvalidArgument("mass mismatch".into()));
    }
    if costs.as_slice().iter().any(|c| !c.is_finite()) {
        return Err(LmsError::InvalidArgument("transport costs must be finite".into()));
    }
    let mut s = Simplex::new(costs, ma, mb);
    let mut next = 0;
    loop {
        while let Some(e) = s.find_entering(&mut next) {
            s.pivot(e);
        }
        // Guard against drift in the incrementally updated potentials.
        s.refresh_potentials();
        match s.find_entering(&mut next) {
            Some(e) => s.pivot(e),
            None => break,
        }
    }
    let real = s.real_arcs();
    if (real..real + s.na + s.nb).any(|e| s.flow[e] != 0) {
        return Err(LmsError::InvalidArgument("transport problem infeasible".into()));
    }
    Ok((0..real)
        .filter(|&e| s.flow[e] > 0)
        .map(|e| (e / s.nb, e % s.nb, s.flow[e]))
        .collect())
}

/// Whether the bipartite graph of entries `≤ threshold` has a perfect
/// matching (Hopcroft–Karp).
pub fn bottleneck_feasible(costs: &Matrix, threshold: f64) -> bool {
    let (n, m) = costs.shape();
    if n != m {
        return false;
    }
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..m).filter(|&j| costs[(i, j)] <= threshold).collect())
        .collect();
    max_matching(&adj, m) == n
}

/// Size of a maximum matching; `adj[i]` lists the right vertices of left `i`.
pub fn max_matching(adj: &[Vec<usize>], right: usize) -> usize {
    const NIL: usize = usize::MAX;
    let left = adj.len();
    let mut match_l = vec![NIL; left];
    let mut match_r = vec![NIL; right];
    let mut dist = vec![0usize; left];
    let mut size = 0;
    loop {
        // BFS layering from free left vertices.
        let mut queue = VecDeque::new();
        for u in 0..left {
            if match_l[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return size;
        }
        // Iterative DFS along the layers.
        let mut it = vec![0usize; left];
        for start in 0..left {
            if match_l[start] != NIL {
                continue;
            }
            let mut stack = vec![start];
            while let Some(&u) = stack.last() {
                if it[u] == adj[u].len() {
                    dist[u] = usize::MAX;
                    stack.pop();
                    continue;
                }
                let v = adj[u][it[u]];
                it[u] += 1;
                let w = match_r[v];
                if w == NIL {
                    // Augment along the stack.
                    let mut v_cur = v;
                    while let Some(x) = stack.pop() {
                        let prev = match_l[x];
                        match_l[x] = v_cur;
                        match_r[v_cur] = x;
                        v_cur = prev;
                    }
                    size += 1;
                    break;
                } else if dist[w] == dist[u] + 1 {
                    stack.push(w);
                }
            }
        }
    }
}
