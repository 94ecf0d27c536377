//! Distance-d colorings and integer-lattice combinatorics.
//!
//! A distance-d coloring gives different colors to any two nodes that are at
//! most `d` hops apart. Colors are 0-based in this API (`0..m`); the CLI
//! prints them 1-based.

use num_bigint::BigUint;

use crate::graph::{BallSearch, PatternGraph};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColoringMethod {
    Greedy,
    Banded,
    Lattice,
    /// Assignment supplied by the caller.
    Given,
}

/// Which graph the certified distance refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphMode {
    /// Directed `G(A)`; both orientations of every pair are separated.
    Directed,
    /// Undirected `|G(A)|`.
    Undirected,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coloring {
    color_of: Vec<usize>,
    classes: Vec<Vec<usize>>,
    certified_distance: usize,
    method: ColoringMethod,
    mode: GraphMode,
}

impl Coloring {
    /// Wraps a node → color assignment. Unused colors are dropped and the
    /// remaining ones renumbered in increasing order, so every class is
    /// nonempty. The certificate is taken on trust; see [`validate_coloring`].
    pub fn from_assignment(
        color_of: Vec<usize>,
        certified_distance: usize,
        method: ColoringMethod,
        mode: GraphMode,
    ) -> Self {
        let m = color_of.iter().map(|&c| c + 1).max().unwrap_or(0);
        let mut relabel = vec![usize::MAX; m];
        for &c in &color_of {
            relabel[c] = 0;
        }
        let mut next = 0;
        for r in relabel.iter_mut().filter(|r| **r == 0) {
            *r = next;
            next += 1;
        }
        let color_of: Vec<usize> = color_of.into_iter().map(|c| relabel[c]).collect();
        let mut classes = vec![Vec::new(); next];
        for (i, &c) in color_of.iter().enumerate() {
            classes[c].push(i);
        }
        Self { color_of, classes, certified_distance, method, mode }
    }

    pub fn n(&self) -> usize {
        self.color_of.len()
    }

    pub fn num_colors(&self) -> usize {
        self.classes.len()
    }

    pub fn color_of(&self) -> &[usize] {
        &self.color_of
    }

    /// Color classes `V_ℓ`, each sorted increasingly.
    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn certified_distance(&self) -> usize {
        self.certified_distance
    }

    pub fn method(&self) -> ColoringMethod {
        self.method
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    /// Size of the largest class, `γ`.
    pub fn max_class_size(&self) -> usize {
        self.classes.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.classes.iter().map(Vec::len).collect()
    }
}

fn check_distance(d: usize) -> Result<()> {
    if d < 1 {
        return Err(Error::InvalidArgument("coloring distance must be at least 1".into()));
    }
    Ok(())
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::InvalidArgument(format!("order has {} entries, expected {n}", order.len())));
    }
    let mut seen = vec![false; n];
    for &v in order {
        if v >= n || std::mem::replace(&mut seen[v], true) {
            return Err(Error::InvalidArgument("order is not a permutation".into()));
        }
    }
    Ok(())
}

/// Greedy distance-d coloring: visits nodes in `order` (natural order when
/// `None`) and gives each the smallest color not used within distance `d`.
/// On a directed graph both `d(i,j) <= d` and `d(j,i) <= d` count as conflicts.
/// Uses at most `Δ^d + 1` colors.
pub fn greedy_coloring(g: &PatternGraph, d: usize, order: Option<&[usize]>) -> Result<Coloring> {
    check_distance(d)?;
    let n = g.n();
    let natural: Vec<usize>;
    let order = match order {
        Some(o) => {
            check_permutation(o, n)?;
            o
        }
        None => {
            natural = (0..n).collect();
            &natural
        }
    };

    const NONE: usize = usize::MAX;
    let mut color = vec![NONE; n];
    // forbidden[c] == i + 1 marks color c as used near node i.
    let mut forbidden: Vec<usize> = Vec::new();
    let mut search = BallSearch::new(n);
    for &i in order {
        let mut mark = |search: &mut BallSearch, adj: &[Vec<usize>]| {
            for &(j, _) in search.ball(adj, i, d) {
                let c = color[j];
                if c != NONE {
                    if forbidden.len() <= c {
                        forbidden.resize(c + 1, 0);
                    }
                    forbidden[c] = i + 1;
                }
            }
        };
        mark(&mut search, g.out_lists());
        if g.is_directed() {
            mark(&mut search, g.in_lists());
        }
        color[i] = (0..).find(|&c| forbidden.get(c).is_none_or(|&s| s != i + 1)).expect("a free color exists");
    }
    let mode = if g.is_directed() { GraphMode::Directed } else { GraphMode::Undirected };
    Ok(Coloring::from_assignment(color, d, ColoringMethod::Greedy, mode))
}

/// `col(i) = i mod (dβ + 1)`: a distance-d coloring of any matrix with
/// semi-bandwidth at most `β`, using `min(n, dβ + 1)` colors.
pub fn banded_coloring(n: usize, beta: usize, d: usize) -> Result<Coloring> {
    banded_coloring_ordered(&(0..n).collect::<Vec<_>>(), beta, d)
}

/// Banded coloring after a symmetric permutation: node `order[k]` gets color
/// `k mod (dβ + 1)`, where `β` is the semi-bandwidth of the permuted matrix
/// (for instance the result of a Cuthill–McKee ordering).
pub fn banded_coloring_ordered(order: &[usize], beta: usize, d: usize) -> Result<Coloring> {
    check_distance(d)?;
    if beta < 1 {
        return Err(Error::InvalidArgument("bandwidth must be at least 1".into()));
    }
    if order.is_empty() {
        return Err(Error::InvalidArgument("banded coloring needs at least one node".into()));
    }
    check_permutation(order, order.len())?;
    let period = d * beta + 1;
    let mut color = vec![0; order.len()];
    for (k, &v) in order.iter().enumerate() {
        color[v] = k % period;
    }
    Ok(Coloring::from_assignment(color, d, ColoringMethod::Banded, GraphMode::Undirected))
}

/// Extents `(N_1, ..., N_D)` of a D-dimensional grid with nearest-neighbor
/// edges. Node index `Σ_k w_k Π_{j<k} N_j` puts the first coordinate fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeSpec {
    dims: Vec<usize>,
}

impl LatticeSpec {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidArgument("lattice needs D >= 1 and every extent >= 1".into()));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dimension(&self) -> usize {
        self.dims.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        self.dims
            .iter()
            .map(|&nk| {
                let w = index % nk;
                index /= nk;
                w
            })
            .collect()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.dims).rev().fold(0, |acc, (&w, &nk)| acc * nk + w)
    }

    /// Nearest-neighbor grid graph, undirected.
    pub fn graph(&self) -> PatternGraph {
        let mut edges = Vec::new();
        let mut stride = 1;
        for &nk in &self.dims {
            for v in 0..self.num_nodes() {
                if (v / stride) % nk + 1 < nk {
                    edges.push((v, v + stride));
                }
            }
            stride *= nk;
        }
        PatternGraph::from_edges(self.num_nodes(), edges, false).expect("grid edges are in bounds")
    }
}

/// `col(w) = Σ_k (w_k mod (d+1)) (d+1)^k`: a distance-d coloring of the grid
/// with at most `(d+1)^D` colors. Each class is a sub-lattice with spacing
/// `d + 1`.
pub fn lattice_coloring(spec: &LatticeSpec, d: usize) -> Result<Coloring> {
    check_distance(d)?;
    let p = d + 1;
    let color = (0..spec.num_nodes()).map(|v| spec.coords(v).iter().rev().fold(0, |acc, &w| acc * p + w % p)).collect();
    Ok(Coloring::from_assignment(color, d, ColoringMethod::Lattice, GraphMode::Undirected))
}

/// Two same-colored nodes at distance `dist <= d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub dist: usize,
}

/// Checks that no two nodes of one class are within distance `d` in `g`
/// (either orientation when `g` is directed).
pub fn validate_coloring(g: &PatternGraph, col: &Coloring, d: usize) -> Result<(), Violation> {
    assert_eq!(g.n(), col.n(), "coloring and graph sizes differ");
    let mut search = BallSearch::new(g.n());
    for i in 0..g.n() {
        for &(j, dist) in search.ball(g.out_lists(), i, d) {
            if j != i && col.color_of[j] == col.color_of[i] {
                return Err(Violation { i, j, dist: dist as usize });
            }
        }
    }
    Ok(())
}

fn binomial(a: usize, b: usize) -> BigUint {
    if b > a {
        return BigUint::from(0u32);
    }
    let b = b.min(a - b);
    let mut acc = BigUint::from(1u32);
    for k in 0..b {
        acc *= a - k;
        acc /= k + 1;
    }
    acc
}

/// `ℓ_D(d)`, the number of `z ∈ Z^D` with `‖z‖₁ <= d`:
/// `Σ_{k=0}^{D} C(D,k) C(d+D−k, D)` with `C(a,b) = 0` for `a < b`.
pub fn lattice_ball_size(dim: usize, d: usize) -> Result<BigUint> {
    if dim < 1 {
        return Err(Error::InvalidArgument("lattice dimension must be at least 1".into()));
    }
    Ok((0..=dim).map(|k| binomial(dim, k) * binomial(d + dim - k, dim)).sum())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SphereSize {
    /// `ℓ_D(d) − ℓ_D(d−1)`.
    pub exact: BigUint,
    /// `2 D d^{D−1}`.
    pub bound: BigUint,
}

/// Number of `z ∈ Z^D` with `‖z‖₁ = d`, and its upper bound.
pub fn lattice_sphere_size(dim: usize, d: usize) -> Result<SphereSize> {
    if d < 1 {
        return Err(Error::InvalidArgument("sphere radius must be at least 1".into()));
    }
    let exact = lattice_ball_size(dim, d)? - lattice_ball_size(dim, d - 1)?;
    let bound = BigUint::from(2 * dim) * BigUint::from(d).pow(dim as u32 - 1);
    Ok(SphereSize { exact, bound })
}
