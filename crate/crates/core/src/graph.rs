//! Graph view of a sparsity pattern.
//!
//! `G(A)` has an edge `i → j` whenever `a_ij ≠ 0` and `i ≠ j`. The undirected
//! graph `|G(A)|` has an edge `{i, j}` whenever either orientation is present.
//! Geodesic distances are hop counts found by breadth-first search; they are
//! stored as `u32` with [`UNREACHABLE`] and [`BEYOND_CAP`] as sentinels.

use std::collections::VecDeque;

use crate::sparse::SparseMatrix;
use crate::{DenseMatrix, Error, Result};

/// No path exists.
pub const UNREACHABLE: u32 = u32::MAX;
/// A capped search stopped before reaching the node: the distance exceeds
/// the cap (and may be infinite).
pub const BEYOND_CAP: u32 = u32::MAX - 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternGraph {
    n: usize,
    out_adj: Vec<Vec<usize>>,
    /// Reverse adjacency; empty for undirected graphs.
    in_adj: Vec<Vec<usize>>,
    directed: bool,
}

impl PatternGraph {
    /// Builds a graph from an edge list. Self-loops and repeated edges are
    /// ignored; undirected graphs get both orientations.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, directed: bool) -> Result<Self> {
        let mut out_adj = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) outside a graph with {n} nodes")));
            }
            if i == j {
                continue;
            }
            out_adj[i].push(j);
            if !directed {
                out_adj[j].push(i);
            }
        }
        for list in &mut out_adj {
            list.sort_unstable();
            list.dedup();
        }
        let in_adj = if directed {
            let mut in_adj = vec![Vec::new(); n];
            for (i, list) in out_adj.iter().enumerate() {
                for &j in list {
                    in_adj[j].push(i);
                }
            }
            in_adj
        } else {
            Vec::new()
        };
        Ok(Self { n, out_adj, in_adj, directed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Out-neighbors (all neighbors when undirected), sorted.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.out_adj[i]
    }

    /// In-neighbors, sorted.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        if self.directed {
            &self.in_adj[i]
        } else {
            &self.out_adj[i]
        }
    }

    pub(crate) fn out_lists(&self) -> &[Vec<usize>] {
        &self.out_adj
    }

    pub(crate) fn in_lists(&self) -> &[Vec<usize>] {
        if self.directed {
            &self.in_adj
        } else {
            &self.out_adj
        }
    }

    pub fn num_edges(&self) -> usize {
        let arcs: usize = self.out_adj.iter().map(Vec::len).sum();
        if self.directed {
            arcs
        } else {
            arcs / 2
        }
    }

    /// Largest number of distinct neighbors (in or out) of a node.
    pub fn max_degree(&self) -> usize {
        (0..self.n)
            .map(|i| {
                if self.directed {
                    let mut all: Vec<usize> = self.out_adj[i].iter().chain(&self.in_adj[i]).copied().collect();
                    all.sort_unstable();
                    all.dedup();
                    all.len()
                } else {
                    self.out_adj[i].len()
                }
            })
            .max()
            .unwrap_or(0)
    }

    /// `|G|`: drops edge directions.
    pub fn to_undirected(&self) -> Self {
        if !self.directed {
            return self.clone();
        }
        let edges = self.out_adj.iter().enumerate().flat_map(|(i, l)| l.iter().map(move |&j| (i, j)));
        Self::from_edges(self.n, edges, false).expect("edges already validated")
    }

    fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.n {
            return Err(Error::InvalidArgument(format!("node {v} outside a graph with {} nodes", self.n)));
        }
        Ok(())
    }
}

/// `G(A)` (directed) or `|G(A)|` (undirected) of a square matrix.
pub fn pattern_graph(a: &SparseMatrix, directed: bool) -> Result<PatternGraph> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "pattern graph needs a square matrix, got {}x{}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    let edges = a.triplets().filter(|&(i, j, v)| i != j && v.norm() != 0.0).map(|(i, j, _)| (i, j));
    PatternGraph::from_edges(a.n_rows(), edges, directed)
}

/// Reusable breadth-first search workspace. Visited flags are generation
/// stamps, so a search costs time proportional to the ball it explores rather
/// than to `n`.
#[derive(Clone, Debug)]
pub struct BallSearch {
    stamp: Vec<u32>,
    generation: u32,
    ball: Vec<(usize, u32)>,
}

impl BallSearch {
    pub fn new(n: usize) -> Self {
        Self { stamp: vec![0; n], generation: 0, ball: Vec::new() }
    }

    fn next_generation(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.fill(0);
            self.generation = 1;
        }
    }

    /// Nodes within `cap` hops of `source` along `adj`, as `(node, distance)`
    /// in BFS order (source first).
    pub fn ball(&mut self, adj: &[Vec<usize>], source: usize, cap: usize) -> &[(usize, u32)] {
        self.next_generation();
        let g = self.generation;
        self.ball.clear();
        self.ball.push((source, 0));
        self.stamp[source] = g;
        let mut head = 0;
        while head < self.ball.len() {
            let (v, dv) = self.ball[head];
            head += 1;
            if dv as usize >= cap {
                continue;
            }
            for &w in &adj[v] {
                if self.stamp[w] != g {
                    self.stamp[w] = g;
                    self.ball.push((w, dv + 1));
                }
            }
        }
        &self.ball
    }
}

/// Directed distances `d(source, j)` for all `j`. With a cap, nodes farther
/// than `cap` are reported as [`BEYOND_CAP`]; without one, unreachable nodes
/// are [`UNREACHABLE`].
pub fn bfs_distances(g: &PatternGraph, source: usize, cap: Option<usize>) -> Result<Vec<u32>> {
    g.check_node(source)?;
    let mut dist = vec![if cap.is_some() { BEYOND_CAP } else { UNREACHABLE }; g.n];
    let mut search = BallSearch::new(g.n);
    for &(v, dv) in search.ball(&g.out_adj, source, cap.unwrap_or(usize::MAX)) {
        dist[v] = dv;
    }
    Ok(dist)
}

/// Level-set sizes `|L^(δ)(source)|` for `δ = 0, 1, ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelSets {
    pub source: usize,
    /// `sizes[δ]` nodes at distance exactly `δ`; `sizes[0] == 1`.
    pub sizes: Vec<usize>,
    pub unreachable: usize,
}

impl LevelSets {
    pub fn eccentricity(&self) -> usize {
        self.sizes.len() - 1
    }
}

pub fn level_set_sizes(g: &PatternGraph, source: usize) -> Result<LevelSets> {
    let dist = bfs_distances(g, source, None)?;
    let mut sizes = Vec::new();
    let mut unreachable = 0;
    for d in dist {
        if d == UNREACHABLE {
            unreachable += 1;
        } else {
            let d = d as usize;
            if sizes.len() <= d {
                sizes.resize(d + 1, 0);
            }
            sizes[d] += 1;
        }
    }
    Ok(LevelSets { source, sizes, unreachable })
}

/// `B^(m)`: keeps `B_ij` when `d(i, j) <= m` in `g`, drops everything else.
pub fn distance_truncate(b: &SparseMatrix, g: &PatternGraph, m: usize) -> Result<SparseMatrix> {
    if b.n_rows() != g.n || b.n_cols() != g.n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, graph has {} nodes",
            b.n_rows(),
            b.n_cols(),
            g.n
        )));
    }
    let mut search = BallSearch::new(g.n);
    let mut keep = vec![false; g.n];
    let mut entries = Vec::new();
    for i in 0..g.n {
        let ball = search.ball(&g.out_adj, i, m);
        for &(j, _) in ball {
            keep[j] = true;
        }
        entries.extend(b.row(i).filter(|&(j, _)| keep[j]).map(|(j, v)| (i, j, v)));
        for &(j, _) in ball {
            keep[j] = false;
        }
    }
    SparseMatrix::from_triplets(g.n, g.n, entries)
}

/// Dense counterpart of [`distance_truncate`].
pub fn distance_truncate_dense(b: &DenseMatrix, g: &PatternGraph, m: usize) -> Result<SparseMatrix> {
    if b.nrows() != g.n || b.ncols() != g.n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, graph has {} nodes",
            b.nrows(),
            b.ncols(),
            g.n
        )));
    }
    let mut search = BallSearch::new(g.n);
    let mut entries = Vec::new();
    for i in 0..g.n {
        entries.extend(search.ball(&g.out_adj, i, m).iter().map(|&(j, _)| (i, j, b[(i, j)])));
    }
    SparseMatrix::from_triplets(g.n, g.n, entries)
}

/// A bandwidth-reducing node order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RcmOrdering {
    /// `order[k]` is the original node placed at position `k`.
    pub order: Vec<usize>,
    pub bandwidth_before: usize,
    pub bandwidth_after: usize,
}

/// Largest `|pos(i) - pos(j)|` over edges, where `order[pos(i)] = i`.
pub fn bandwidth(g: &PatternGraph, order: &[usize]) -> usize {
    let mut pos = vec![0usize; order.len()];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    g.out_adj
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.iter().map(move |&j| (i, j)))
        .map(|(i, j)| pos[i].abs_diff(pos[j]))
        .max()
        .unwrap_or(0)
}

/// Reverse Cuthill–McKee ordering of `|g|`, one connected component at a
/// time, each started from a pseudo-peripheral node.
pub fn cuthill_mckee(g: &PatternGraph) -> RcmOrdering {
    let ug = g.to_undirected();
    let n = ug.n;
    let adj = &ug.out_adj;
    let degree = |v: usize| adj[v].len();

    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    let mut scratch = Vec::new();
    let mut search = BallSearch::new(n);

    while order.len() < n {
        let seed = (0..n).filter(|&v| !placed[v]).min_by_key(|&v| degree(v)).expect("unplaced node exists");
        let start = pseudo_peripheral(adj, seed, &mut search);

        placed[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            scratch.clear();
            scratch.extend(adj[v].iter().copied().filter(|&w| !placed[w]));
            scratch.sort_by_key(|&w| (degree(w), w));
            for &w in &scratch {
                placed[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();

    let identity: Vec<usize> = (0..n).collect();
    RcmOrdering { bandwidth_before: bandwidth(&ug, &identity), bandwidth_after: bandwidth(&ug, &order), order }
}

/// George–Liu heuristic: hop to a minimum-degree node of the last level set
/// while the eccentricity keeps growing.
fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize, search: &mut BallSearch) -> usize {
    let mut current = seed;
    let mut ecc: Option<u32> = None;
    loop {
        let ball = search.ball(adj, current, usize::MAX);
        let far = ball.last().map(|&(_, d)| d).unwrap_or(0);
        if ecc.is_some_and(|e| far <= e) {
            return current;
        }
        ecc = Some(far);
        let candidate = ball
            .iter()
            .filter(|&&(_, d)| d == far)
            .map(|&(v, _)| v)
            .min_by_key(|&v| (adj[v].len(), v))
            .unwrap_or(current);
        if candidate == current {
            return current;
        }
        current = candidate;
    }
}
