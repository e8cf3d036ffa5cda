//! Minimum spanning trees of point clouds and the exact subgradient of their length.
//!
//! Candidate edges are totally ordered by `(length, i, j)` with `i < j`. Under a
//! strict total order the minimum spanning tree is unique, so [`kruskal_mst`],
//! [`prim_mst`] and [`brute_force_mst`] all return the same edge set even when
//! lengths tie.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TregError};
use crate::point_cloud::{euclidean, DistanceMatrix, Gradient, PointCloud};

/// Largest cloud accepted by [`brute_force_mst`]: `8^6` Prüfer sequences.
pub const BRUTE_FORCE_MAX_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub i: usize,
    pub j: usize,
    pub length: f64,
}

impl MstEdge {
    fn new(a: usize, b: usize, length: f64) -> Self {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        Self { i, j, length }
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        edge_order((self.length, self.i, self.j), (other.length, other.i, other.j))
    }
}

#[inline]
fn edge_order(a: (f64, usize, usize), b: (f64, usize, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mst {
    pub n: usize,
    /// Sorted by `(length, i, j)`.
    pub edges: Vec<MstEdge>,
    pub total_length: f64,
}

impl Mst {
    /// Canonicalizes an edge list: sorts it and sums lengths in sorted order so
    /// that the total depends only on the multiset of lengths.
    fn from_edges(n: usize, mut edges: Vec<MstEdge>) -> Self {
        edges.sort_unstable_by(MstEdge::key_cmp);
        let total_length = edges.iter().fold(0.0, |acc, e| acc + e.length);
        Self { n, edges, total_length }
    }

    pub fn has_zero_length_edge(&self) -> bool {
        self.edges.iter().any(|e| e.length == 0.0)
    }

    /// `sum(length^alpha)` over the tree edges.
    pub fn alpha_length(&self, alpha: f64) -> Result<f64> {
        alpha_length(self, alpha)
    }
}

/// Disjoint-set forest with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`; returns false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal's algorithm over the dense distance matrix.
pub fn kruskal_mst(dist: &DistanceMatrix) -> Mst {
    let n = dist.n();
    let mut candidates: Vec<(f64, u32, u32)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        let row = dist.row(i);
        for (j, &length) in row.iter().enumerate().skip(i + 1) {
            candidates.push((length, i as u32, j as u32));
        }
    }
    // Keys are unique, so the parallel unstable sort is deterministic.
    candidates.par_sort_unstable_by(|a, b| {
        edge_order((a.0, a.1 as usize, a.2 as usize), (b.0, b.1 as usize, b.2 as usize))
    });

    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for &(length, i, j) in &candidates {
        if edges.len() + 1 >= n {
            break;
        }
        if uf.union(i as usize, j as usize) {
            edges.push(MstEdge { i: i as usize, j: j as usize, length });
        }
    }
    Mst::from_edges(n, edges)
}

/// Dense Prim's algorithm computing distances on the fly: `O(n^2 d)` time and
/// `O(n)` memory. Uses the same `(length, i, j)` order as [`kruskal_mst`] and
/// therefore returns the identical tree.
pub fn prim_mst(cloud: &PointCloud) -> Mst {
    let n = cloud.n();
    if n == 1 {
        return Mst::from_edges(1, Vec::new());
    }
    let mut in_tree = vec![false; n];
    // Best known connection of each outside vertex: (length, tree endpoint).
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); n];
    let mut edges = Vec::with_capacity(n - 1);

    let key = |len: f64, u: usize, v: usize| (len, u.min(v), u.max(v));

    let mut added = 0usize;
    in_tree[0] = true;
    for _ in 1..n {
        let p = cloud.point(added);
        let mut pick = usize::MAX;
        let mut pick_key = (f64::INFINITY, usize::MAX, usize::MAX);
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let len = euclidean(p, cloud.point(v));
            let cand = key(len, added, v);
            let slot = &mut best[v];
            if slot.1 == usize::MAX || edge_order(cand, key(slot.0, slot.1, v)) == Ordering::Less {
                *slot = (len, added);
            }
            let k = key(slot.0, slot.1, v);
            if pick == usize::MAX || edge_order(k, pick_key) == Ordering::Less {
                pick = v;
                pick_key = k;
            }
        }
        in_tree[pick] = true;
        edges.push(MstEdge::new(best[pick].1, pick, best[pick].0));
        added = pick;
    }
    Mst::from_edges(n, edges)
}

/// Exhaustive minimum over all `n^(n-2)` labelled spanning trees, enumerated as
/// Prüfer sequences. Among trees of minimal length the one whose sorted edge
/// keys are lexicographically smallest is returned, which is the tree Kruskal
/// selects under the same tie-break.
pub fn brute_force_mst(dist: &DistanceMatrix) -> Result<Mst> {
    let n = dist.n();
    if n > BRUTE_FORCE_MAX_POINTS {
        return Err(TregError::OracleTooLarge { max: BRUTE_FORCE_MAX_POINTS, n });
    }
    if n == 1 {
        return Ok(Mst::from_edges(1, Vec::new()));
    }
    if n == 2 {
        return Ok(Mst::from_edges(2, vec![MstEdge::new(0, 1, dist.get(0, 1))]));
    }

    let mut best: Option<Mst> = None;
    let mut seq = vec![0usize; n - 2];
    loop {
        let tree = Mst::from_edges(n, prufer_decode(&seq, n, dist));
        best = Some(match best {
            None => tree,
            Some(cur) => {
                if better_tree(&tree, &cur) {
                    tree
                } else {
                    cur
                }
            }
        });
        // Odometer increment over {0..n}^(n-2).
        let mut pos = 0;
        loop {
            if pos == seq.len() {
                return Ok(best.expect("at least one tree enumerated"));
            }
            seq[pos] += 1;
            if seq[pos] < n {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
    }
}

fn better_tree(cand: &Mst, cur: &Mst) -> bool {
    let tol = 1e-12 * cur.total_length.abs();
    if cand.total_length < cur.total_length - tol {
        return true;
    }
    if cand.total_length > cur.total_length + tol {
        return false;
    }
    for (a, b) in cand.edges.iter().zip(&cur.edges) {
        match a.key_cmp(b) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
    }
    false
}

fn prufer_decode(seq: &[usize], n: usize, dist: &DistanceMatrix) -> Vec<MstEdge> {
    let mut degree = vec![1usize; n];
    for &x in seq {
        degree[x] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &x in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf always exists");
        edges.push(MstEdge::new(leaf, x, dist.get(leaf, x)));
        degree[leaf] -= 1;
        degree[x] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    debug_assert_eq!(rest.len(), 2);
    edges.push(MstEdge::new(rest[0], rest[1], dist.get(rest[0], rest[1])));
    edges
}

/// Gradient of the MST length with respect to every point.
#[derive(Debug, Clone, PartialEq)]
pub struct MstGradient {
    pub grads: Gradient,
    /// Points touching a zero-length edge; those edges contribute nothing.
    pub duplicate_flags: Vec<bool>,
}

impl MstGradient {
    pub fn has_duplicates(&self) -> bool {
        self.duplicate_flags.iter().any(|&f| f)
    }
}

/// Row `x` is the sum over tree edges `(x, z)` of `(x - z) / |x - z|`.
pub fn mst_length_gradient(cloud: &PointCloud, mst: &Mst) -> MstGradient {
    let (n, d) = (cloud.n(), cloud.dim());
    let mut grads = Gradient::zeros(n, d);
    let mut duplicate_flags = vec![false; n];
    let mut unit = vec![0.0; d];
    for e in &mst.edges {
        if e.length == 0.0 {
            duplicate_flags[e.i] = true;
            duplicate_flags[e.j] = true;
            continue;
        }
        let inv = 1.0 / e.length;
        for ((u, a), b) in unit.iter_mut().zip(cloud.point(e.i)).zip(cloud.point(e.j)) {
            *u = (a - b) * inv;
        }
        for (g, u) in grads.row_mut(e.i).iter_mut().zip(&unit) {
            *g += u;
        }
        for (g, u) in grads.row_mut(e.j).iter_mut().zip(&unit) {
            *g -= u;
        }
    }
    MstGradient { grads, duplicate_flags }
}

pub fn alpha_length(mst: &Mst, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(TregError::param("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    if alpha == 1.0 {
        return Ok(mst.total_length);
    }
    Ok(mst.edges.iter().fold(0.0, |acc, e| acc + e.length.powf(alpha)))
}

/// MST of a cloud using the fastest exact route.
pub fn mst_of(cloud: &PointCloud) -> Mst {
    prim_mst(cloud)
}
