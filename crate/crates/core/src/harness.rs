//! Test-matrix families, dense reference oracles and experiment sweeps.
//!
//! Families are named by compact spec strings:
//!
//! | spec | matrix |
//! |---|---|
//! | `tridiag:N[:a:b:c]` | `tridiag(a, b, c)`, default `(−1, 4, −1)` |
//! | `skew:N` | `tridiag(−1, 2+i, 1)`, normal but not Hermitian |
//! | `laplace2d:N[:b]` | `I⊗M + M⊗I` with `M = tridiag(−1, b, −1)`, default `b = 4` |
//! | `cov:N:α:β` | `(1 − r/α)^β` for grid points at distance `r <= α` |
//! | `gmrf:n:φ[:δ[:seed]]` | GMRF precision matrix on `n` random points in `[0, 1]` |
//!
//! Experiment sweeps read a TOML config and write CSV; see [`ExperimentConfig`].

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::bounds::{
    crouzeix_constant, decay_model_inverse_hpd, fit_decay_envelope, fit_decay_model, inverse_sqrt_preset, BoundRequest,
    DecayModel,
};
use crate::coloring::{
    banded_coloring, banded_coloring_ordered, greedy_coloring, lattice_coloring, Coloring, LatticeSpec,
};
use crate::dense::{matrix_function_dense, ScalarFunction, HERMITIAN_TOL};
use crate::graph::{bfs_distances, cuthill_mckee, pattern_graph, PatternGraph, UNREACHABLE};
use crate::krylov::KrylovOperator;
use crate::probing::{error_norms, estimate_trace, sparse_approximation, spectral_norm, Evaluation, ProbingOracle};
use crate::sparse::SparseMatrix;
use crate::{DenseMatrix, Error, Result, Scalar};

/// Largest `n` for which a dense `f(A)` is computed by default.
pub const DEFAULT_ORACLE_CAP: usize = 4096;
/// Largest number of stored entries a covariance matrix may have.
pub const COVARIANCE_NNZ_CAP: usize = 20_000_000;
pub const DEFAULT_GMRF_SEED: u64 = 20_170_101;

#[derive(Clone, Debug, PartialEq)]
pub enum MatrixSpec {
    Tridiag {
        n: usize,
        sub: Scalar,
        diag: Scalar,
        sup: Scalar,
    },
    ShiftedSkew {
        n: usize,
    },
    /// `N² × N²` Laplacian-type matrix on an `N × N` grid.
    Laplace2d {
        side: usize,
        diag: f64,
    },
    /// Covariance on an `N × N` integer grid.
    Covariance {
        side: usize,
        alpha: f64,
        beta: f64,
    },
    Gmrf {
        n: usize,
        phi: f64,
        delta: f64,
        seed: u64,
    },
}

impl MatrixSpec {
    pub fn family(&self) -> &'static str {
        match self {
            Self::Tridiag { .. } => "tridiag",
            Self::ShiftedSkew { .. } => "skew",
            Self::Laplace2d { .. } => "laplace2d",
            Self::Covariance { .. } => "cov",
            Self::Gmrf { .. } => "gmrf",
        }
    }

    /// Matrix dimension.
    pub fn n(&self) -> usize {
        match *self {
            Self::Tridiag { n, .. } | Self::ShiftedSkew { n } | Self::Gmrf { n, .. } => n,
            Self::Laplace2d { side, .. } | Self::Covariance { side, .. } => side * side,
        }
    }

    /// Grid extents when the pattern is a nearest-neighbor lattice.
    pub fn lattice_dims(&self) -> Option<Vec<usize>> {
        match *self {
            Self::Tridiag { n, .. } | Self::ShiftedSkew { n } => Some(vec![n]),
            Self::Laplace2d { side, .. } => Some(vec![side, side]),
            _ => None,
        }
    }

    /// Whether the generated matrix is Hermitian by construction.
    pub fn is_hermitian(&self) -> bool {
        match self {
            Self::Tridiag { sub, diag, sup, .. } => *sub == sup.conj() && diag.im == 0.0,
            Self::ShiftedSkew { .. } => false,
            _ => true,
        }
    }

    // The negated comparisons also reject NaN parameters.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match *self {
            Self::Tridiag { n, .. } | Self::ShiftedSkew { n } if n < 1 => bad("size must be at least 1".into()),
            Self::Laplace2d { side, .. } if side < 1 => bad("grid side must be at least 1".into()),
            Self::Covariance { side, alpha, beta } => {
                if side < 1 || !(alpha > 0.0) || !(beta > 0.0) {
                    bad(format!("covariance needs N >= 1, α > 0, β > 0; got {side}, {alpha}, {beta}"))
                } else {
                    Ok(())
                }
            }
            Self::Gmrf { n, phi, delta, .. } => {
                if n < 1 || !(phi > 0.0) || !(delta > 0.0 && delta < 1.0) {
                    bad(format!("gmrf needs n >= 1, φ > 0, δ in (0, 1); got {n}, {phi}, {delta}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for MatrixSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Tridiag { n, sub, diag, sup } => {
                if sub.im == 0.0 && diag.im == 0.0 && sup.im == 0.0 {
                    write!(f, "tridiag:{n}:{}:{}:{}", sub.re, diag.re, sup.re)
                } else {
                    write!(f, "tridiag:{n}:{sub}:{diag}:{sup}")
                }
            }
            Self::ShiftedSkew { n } => write!(f, "skew:{n}"),
            Self::Laplace2d { side, diag } => write!(f, "laplace2d:{side}:{diag}"),
            Self::Covariance { side, alpha, beta } => write!(f, "cov:{side}:{alpha}:{beta}"),
            Self::Gmrf { n, phi, delta, seed } => write!(f, "gmrf:{n}:{phi}:{delta}:{seed}"),
        }
    }
}

impl FromStr for MatrixSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidArgument(format!("cannot parse matrix spec '{s}'"));
        let int = |k: usize| parts.get(k).ok_or_else(bad)?.parse::<usize>().map_err(|_| bad());
        let real = |k: usize| parts.get(k).ok_or_else(bad)?.parse::<f64>().map_err(|_| bad());
        let opt_real = |k: usize, default: f64| if parts.len() > k { real(k) } else { Ok(default) };
        let spec = match parts[0] {
            "tridiag" => match parts.len() {
                2 => MatrixSpec::Tridiag { n: int(1)?, sub: c(-1.0), diag: c(4.0), sup: c(-1.0) },
                5 => MatrixSpec::Tridiag { n: int(1)?, sub: c(real(2)?), diag: c(real(3)?), sup: c(real(4)?) },
                _ => return Err(bad()),
            },
            "skew" if parts.len() == 2 => MatrixSpec::ShiftedSkew { n: int(1)? },
            "laplace2d" if matches!(parts.len(), 2 | 3) => {
                MatrixSpec::Laplace2d { side: int(1)?, diag: opt_real(2, 4.0)? }
            }
            "cov" if parts.len() == 4 => MatrixSpec::Covariance { side: int(1)?, alpha: real(2)?, beta: real(3)? },
            "gmrf" if (3..=5).contains(&parts.len()) => {
                let n = int(1)?;
                let seed =
                    if parts.len() == 5 { parts[4].parse::<u64>().map_err(|_| bad())? } else { DEFAULT_GMRF_SEED };
                MatrixSpec::Gmrf { n, phi: real(2)?, delta: opt_real(3, gmrf_default_delta(n))?, seed }
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn c(x: f64) -> Scalar {
    Scalar::new(x, 0.0)
}

/// `δ = 0.02 · 1000 / n`, so the expected number of neighbors per point does
/// not depend on `n`.
pub fn gmrf_default_delta(n: usize) -> f64 {
    0.02 * 1000.0 / n.max(1) as f64
}

pub fn generate_matrix(spec: &MatrixSpec) -> Result<SparseMatrix> {
    spec.validate()?;
    match *spec {
        MatrixSpec::Tridiag { n, sub, diag, sup } => tridiagonal(n, sub, diag, sup),
        MatrixSpec::ShiftedSkew { n } => tridiagonal(n, c(-1.0), Scalar::new(2.0, 1.0), c(1.0)),
        MatrixSpec::Laplace2d { side, diag } => {
            let idx = |x: usize, y: usize| x + side * y;
            let mut entries = Vec::with_capacity(5 * side * side);
            for y in 0..side {
                for x in 0..side {
                    entries.push((idx(x, y), idx(x, y), c(2.0 * diag)));
                    if x + 1 < side {
                        entries.push((idx(x, y), idx(x + 1, y), c(-1.0)));
                        entries.push((idx(x + 1, y), idx(x, y), c(-1.0)));
                    }
                    if y + 1 < side {
                        entries.push((idx(x, y), idx(x, y + 1), c(-1.0)));
                        entries.push((idx(x, y + 1), idx(x, y), c(-1.0)));
                    }
                }
            }
            SparseMatrix::from_triplets(side * side, side * side, entries)
        }
        MatrixSpec::Covariance { side, alpha, beta } => covariance(side, alpha, beta),
        MatrixSpec::Gmrf { n, phi, delta, seed } => gmrf(n, phi, delta, seed),
    }
}

fn tridiagonal(n: usize, sub: Scalar, diag: Scalar, sup: Scalar) -> Result<SparseMatrix> {
    let mut entries = Vec::with_capacity(3 * n);
    for i in 0..n {
        entries.push((i, i, diag));
        if i + 1 < n {
            entries.push((i, i + 1, sup));
            entries.push((i + 1, i, sub));
        }
    }
    SparseMatrix::from_triplets(n, n, entries)
}

fn covariance(side: usize, alpha: f64, beta: f64) -> Result<SparseMatrix> {
    let n = side * side;
    let reach = alpha.floor() as usize;
    let per_row = (2 * reach.min(side) + 1).pow(2);
    if n.saturating_mul(per_row) > COVARIANCE_NNZ_CAP {
        return Err(Error::InvalidArgument(format!(
            "covariance with N = {side}, α = {alpha} would store about {} entries (cap {COVARIANCE_NNZ_CAP})",
            n.saturating_mul(per_row)
        )));
    }
    let mut entries = Vec::new();
    for y in 0..side {
        for x in 0..side {
            let i = x + side * y;
            for y2 in y.saturating_sub(reach)..(y + reach + 1).min(side) {
                for x2 in x.saturating_sub(reach)..(x + reach + 1).min(side) {
                    let r = ((x.abs_diff(x2).pow(2) + y.abs_diff(y2).pow(2)) as f64).sqrt();
                    if r <= alpha {
                        let v = (1.0 - r / alpha).powf(beta);
                        entries.push((i, x2 + side * y2, c(v)));
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(n, n, entries)
}

/// Points of the GMRF family, i.i.d. uniform on `[0, 1]`.
pub fn gmrf_points(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn gmrf(n: usize, phi: f64, delta: f64, seed: u64) -> Result<SparseMatrix> {
    let s = gmrf_points(n, seed);
    let mut by_position: Vec<usize> = (0..n).collect();
    by_position.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let mut degree = vec![0usize; n];
    let mut entries = Vec::new();
    for (k, &i) in by_position.iter().enumerate() {
        for &j in &by_position[k + 1..] {
            if s[j] - s[i] >= delta {
                break;
            }
            entries.push((i, j, c(-phi)));
            entries.push((j, i, c(-phi)));
            degree[i] += 1;
            degree[j] += 1;
        }
    }
    entries.extend((0..n).map(|i| (i, i, c(1.0 + phi * degree[i] as f64))));
    SparseMatrix::from_triplets(n, n, entries)
}

/// Random sparse test matrix with about `per_row` off-diagonal entries per
/// row and complex values. Hermitian matrices get a mirrored pattern and a
/// real diagonal.
pub fn random_sparse_matrix(n: usize, per_row: usize, hermitian: bool, seed: u64) -> SparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for i in 0..n {
        entries.push((i, i, c(rng.random_range(-2.0..2.0))));
        for _ in 0..per_row {
            let j = rng.random_range(0..n);
            if j == i {
                continue;
            }
            let v = Scalar::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if hermitian {
                entries.push((i, j, v * 0.5));
                entries.push((j, i, v.conj() * 0.5));
            } else {
                entries.push((i, j, v));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, entries).expect("indices are in bounds")
}

/// Dense `f(A)` for scoring, refused above `cap`.
pub fn dense_reference(a: &SparseMatrix, f: &ScalarFunction, hermitian: bool, cap: usize) -> Result<DenseMatrix> {
    if a.n_rows() > cap {
        return Err(Error::OracleCap { n: a.n_rows(), cap });
    }
    matrix_function_dense(a, f, hermitian)
}

/// Heuristic Hermitian check used when the caller does not say.
pub fn detect_hermitian(a: &SparseMatrix) -> bool {
    a.is_hermitian(HERMITIAN_TOL)
}

/// Magnitudes of column `j` of a dense matrix paired with `d(i, j)` in `g`
/// (entries in other components are skipped).
pub fn column_decay_samples(fa: &DenseMatrix, g: &PatternGraph, j: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    let dist = bfs_distances(g, j, None)?;
    let (mut mags, mut dists) = (Vec::new(), Vec::new());
    for (i, &d) in dist.iter().enumerate() {
        if d != UNREACHABLE {
            mags.push(fa[(i, j)].norm());
            dists.push(d as usize);
        }
    }
    Ok((mags, dists))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Trace,
    Sparse,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Trace => "trace",
            Task::Sparse => "sparse",
        }
    }

    /// Distance the coloring must certify for probing distance `d`.
    pub fn coloring_distance(self, d: usize) -> usize {
        match self {
            Task::Trace => d,
            Task::Sparse => 2 * d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColoringChoice {
    /// Greedy in natural order; on `G(A)` for traces, `|G(A)|` otherwise.
    Greedy,
    /// Greedy in reverse Cuthill–McKee order.
    GreedyRcm,
    /// Banded coloring; bandwidth defaults to the semi-bandwidth of `A`.
    Banded {
        beta: Option<usize>,
    },
    /// Banded coloring after a reverse Cuthill–McKee permutation.
    RcmBanded,
    Lattice {
        dims: Vec<usize>,
    },
}

impl ColoringChoice {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Greedy => "greedy",
            Self::GreedyRcm => "greedy-rcm",
            Self::Banded { .. } => "banded",
            Self::RcmBanded => "rcm-banded",
            Self::Lattice { .. } => "lattice",
        }
    }
}

/// Colors `A` for `task` at probing distance `d`.
pub fn build_coloring(a: &SparseMatrix, choice: &ColoringChoice, task: Task, d: usize) -> Result<Coloring> {
    let dist = task.coloring_distance(d);
    match choice {
        ColoringChoice::Greedy => greedy_coloring(&pattern_graph(a, task == Task::Trace)?, dist, None),
        ColoringChoice::GreedyRcm => {
            let order = cuthill_mckee(&pattern_graph(a, false)?).order;
            greedy_coloring(&pattern_graph(a, task == Task::Trace)?, dist, Some(&order))
        }
        ColoringChoice::Banded { beta } => {
            let bw = a.semi_bandwidth();
            let beta = beta.unwrap_or(bw).max(1);
            if beta < bw {
                return Err(Error::InvalidArgument(format!(
                    "bandwidth {beta} is below the matrix semi-bandwidth {bw}"
                )));
            }
            banded_coloring(a.n_rows(), beta, dist)
        }
        ColoringChoice::RcmBanded => {
            let r = cuthill_mckee(&pattern_graph(a, false)?);
            banded_coloring_ordered(&r.order, r.bandwidth_after.max(1), dist)
        }
        ColoringChoice::Lattice { dims } => {
            let spec = LatticeSpec::new(dims.clone())?;
            if spec.num_nodes() != a.n_rows() {
                return Err(Error::DimensionMismatch(format!(
                    "lattice {dims:?} has {} nodes, matrix has {}",
                    spec.num_nodes(),
                    a.n_rows()
                )));
            }
            lattice_coloring(&spec, dist)
        }
    }
}

/// Named bound kinds; short aliases depend on the task.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    TraceGeneric,
    TraceBanded,
    TraceLattice,
    TracePoly,
    SparseFrobeniusPoly,
    SparseNormsGeneric,
    Sparse1NormBanded,
    KrylovCombinedFrobenius,
    KrylovTrace,
}

impl BoundKind {
    /// Accepts the full kind names and the short aliases
    /// `generic | banded | lattice | poly | krylov`, resolved for `task`.
    pub fn parse(s: &str, task: Task) -> Result<Self> {
        use BoundKind::*;
        Ok(match (s.replace('-', "_").as_str(), task) {
            ("trace_generic", _) | ("generic", Task::Trace) => TraceGeneric,
            ("trace_banded", _) | ("banded", Task::Trace) => TraceBanded,
            ("trace_lattice", _) | ("lattice", Task::Trace) => TraceLattice,
            ("trace_poly", _) | ("poly", Task::Trace) => TracePoly,
            ("sparse_frobenius_poly", _) | ("poly", Task::Sparse) => SparseFrobeniusPoly,
            ("sparse_norms_generic", _) | ("generic", Task::Sparse) => SparseNormsGeneric,
            ("sparse_1norm_banded", _) | ("banded", Task::Sparse) => Sparse1NormBanded,
            ("krylov_combined_frobenius", _) | ("krylov", Task::Sparse) => KrylovCombinedFrobenius,
            ("krylov_trace", _) | ("krylov", Task::Trace) => KrylovTrace,
            _ => return Err(Error::InvalidArgument(format!("unknown bound kind '{s}' for a {} task", task.name()))),
        })
    }

    /// Error norm the bound controls for sparse approximations.
    pub fn natural_norm(self) -> ErrorNorm {
        match self {
            BoundKind::Sparse1NormBanded => ErrorNorm::One,
            _ => ErrorNorm::Frobenius,
        }
    }
}

/// Everything a bound formula may need.
#[derive(Clone, Debug)]
pub struct BoundContext<'a> {
    pub n: usize,
    pub d: usize,
    pub steps: Option<usize>,
    pub coloring: &'a Coloring,
    pub beta: usize,
    pub dim: Option<usize>,
}

pub fn bound_request(kind: BoundKind, ctx: &BoundContext) -> Result<BoundRequest> {
    let (n, d) = (ctx.n, ctx.d);
    Ok(match kind {
        BoundKind::TraceGeneric => BoundRequest::TraceGeneric { class_sizes: ctx.coloring.class_sizes(), d },
        BoundKind::TraceBanded => BoundRequest::TraceBanded { n, d },
        BoundKind::TraceLattice => BoundRequest::TraceLattice {
            n,
            d,
            dim: ctx.dim.ok_or_else(|| Error::InvalidArgument("trace_lattice needs the lattice dimension".into()))?,
        },
        BoundKind::TracePoly => BoundRequest::TracePoly { n, d },
        BoundKind::SparseFrobeniusPoly => BoundRequest::SparseFrobeniusPoly { n, d },
        BoundKind::SparseNormsGeneric => {
            BoundRequest::SparseNormsGeneric { n, d, gamma: ctx.coloring.max_class_size() }
        }
        BoundKind::Sparse1NormBanded => BoundRequest::Sparse1NormBanded { d, beta: ctx.beta },
        BoundKind::KrylovCombinedFrobenius => BoundRequest::KrylovCombinedFrobenius {
            n,
            d,
            s: ctx
                .steps
                .ok_or_else(|| Error::InvalidArgument("krylov_combined_frobenius needs Krylov steps".into()))?,
        },
        BoundKind::KrylovTrace => BoundRequest::KrylovTrace { n, d },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorNorm {
    Frobenius,
    One,
    Two,
    Max,
}

/// `exact`, `auto` or a positive step count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepsSetting {
    Exact,
    Auto,
    Fixed(usize),
}

impl FromStr for StepsSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "auto" => Ok(Self::Auto),
            _ => match s.parse::<usize>() {
                Ok(k) if k > 0 => Ok(Self::Fixed(k)),
                _ => Err(Error::InvalidArgument(format!(
                    "steps must be 'exact', 'auto' or a positive integer, got '{s}'"
                ))),
            },
        }
    }
}

impl StepsSetting {
    pub fn evaluation<'a>(self, oracle: Option<&'a DenseMatrix>) -> Evaluation<'a> {
        match (self, oracle) {
            (Self::Exact, Some(fa)) => Evaluation::Oracle(fa),
            (Self::Exact, None) => Evaluation::Exact,
            (Self::Auto, _) => Evaluation::KrylovAuto,
            (Self::Fixed(steps), _) => Evaluation::Krylov { steps },
        }
    }
}

/// Decay model section of an experiment config.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `explicit`, `inverse_hpd`, `inverse_sqrt_preset`, `fit` or `fit_envelope`.
    pub kind: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub q: Option<f64>,
    pub k: Option<f64>,
    /// For explicit models: whether the decay stems from a polynomial
    /// approximation property.
    #[serde(default)]
    pub polynomial: bool,
    /// For fitted models: whether `A` is normal (`K = 1`).
    #[serde(default = "default_true")]
    pub normal: bool,
    /// Column used by fits; defaults to `n / 2`.
    pub column: Option<usize>,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// `n`, `d` or `s`.
    pub variable: String,
    pub values: Vec<usize>,
}

/// One experiment: a matrix family, a function and a sweep.
///
/// ```toml
/// family = "tridiag:{n}"   # `{n}` is replaced by the current n
/// function = "inv"
/// task = "sparse"          # or "trace"
/// n = 1000
/// d = 5
/// steps = "exact"          # "auto" or a step count
/// coloring = "banded"      # greedy | greedy-rcm | banded | rcm-banded | lattice
/// bound = "sparse_frobenius_poly"
/// [model]
/// kind = "inverse_hpd"
/// a = 2.0
/// b = 6.0
/// [sweep]
/// variable = "d"
/// values = [1, 2, 3]
/// ```
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: String,
    pub function: String,
    pub task: String,
    pub n: Option<usize>,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_steps")]
    pub steps: String,
    #[serde(default = "default_coloring")]
    pub coloring: String,
    pub beta: Option<usize>,
    pub dims: Option<Vec<usize>>,
    pub bound: Option<String>,
    pub model: Option<ModelConfig>,
    pub norm: Option<ErrorNorm>,
    pub hermitian: Option<bool>,
    #[serde(default)]
    pub record_timing: bool,
    pub oracle_cap: Option<usize>,
    pub sweep: SweepConfig,
}

fn default_d() -> usize {
    3
}

fn default_steps() -> String {
    "auto".into()
}

fn default_coloring() -> String {
    "greedy".into()
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidArgument(format!("experiment config: {e}")))
    }
}

/// Parses `greedy | greedy-rcm | banded | rcm-banded | lattice`.
pub fn parse_coloring_choice(name: &str, beta: Option<usize>, dims: Option<Vec<usize>>) -> Result<ColoringChoice> {
    Ok(match name {
        "greedy" => ColoringChoice::Greedy,
        "greedy-rcm" => ColoringChoice::GreedyRcm,
        "banded" => ColoringChoice::Banded { beta },
        "rcm-banded" => ColoringChoice::RcmBanded,
        "lattice" => ColoringChoice::Lattice {
            dims: dims.ok_or_else(|| Error::InvalidArgument("lattice coloring needs grid dimensions".into()))?,
        },
        other => return Err(Error::InvalidArgument(format!("unknown coloring method '{other}'"))),
    })
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub family: String,
    pub task: &'static str,
    pub n: usize,
    pub f: String,
    pub d: usize,
    pub coloring: &'static str,
    pub m_colors: usize,
    pub s_steps: Option<usize>,
    /// Real part of the trace estimate, or `‖f(A)^[d]‖_F` for sparse tasks.
    pub estimate: f64,
    /// Real part of `tr(f(A))`, or `‖f(A)‖_F`.
    pub exact: Option<f64>,
    /// `|tr − T|`, or the selected norm of `f(A) − f(A)^[d]`.
    pub abs_error: Option<f64>,
    pub bound: Option<f64>,
    /// `rigorous` or `estimate`.
    pub bound_label: Option<&'static str>,
    pub seconds: Option<f64>,
}

impl ExperimentRecord {
    pub fn ratio(&self) -> Option<f64> {
        match (self.bound, self.abs_error) {
            (Some(b), Some(e)) if e > 0.0 => Some(b / e),
            _ => None,
        }
    }
}

pub const CSV_SCHEMA: &str = "# probe-experiment-csv v1";
pub const CSV_HEADER: &str =
    "family,task,n,f,d,coloring,m_colors,s_steps,estimate,exact,abs_error,bound,bound_label,ratio,seconds";

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn write_csv<W: Write>(records: &[ExperimentRecord], w: &mut W) -> Result<()> {
    writeln!(w, "{CSV_SCHEMA}")?;
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.family,
            r.task,
            r.n,
            r.f,
            r.d,
            r.coloring,
            r.m_colors,
            r.s_steps.map(|s| s.to_string()).unwrap_or_else(|| "exact".into()),
            format_float(r.estimate),
            opt_float(r.exact),
            opt_float(r.abs_error),
            opt_float(r.bound),
            r.bound_label.unwrap_or(""),
            opt_float(r.ratio()),
            opt_float(r.seconds),
        )?;
    }
    Ok(())
}

/// Builds the decay model described by `cfg`. Fitted models need the dense
/// `f(A)`.
pub fn build_model(cfg: &ModelConfig, a: &SparseMatrix, fa: Option<&DenseMatrix>) -> Result<DecayModel> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| Error::InvalidArgument(format!("model '{}' needs '{name}'", cfg.kind)))
    };
    let model = match cfg.kind.as_str() {
        "explicit" => DecayModel::new(need(cfg.c, "c")?, need(cfg.q, "q")?, cfg.k.unwrap_or(1.0), cfg.polynomial)?,
        "inverse_hpd" => {
            let m = decay_model_inverse_hpd(need(cfg.a, "a")?, need(cfg.b, "b")?)?;
            match cfg.c {
                Some(c) => m.with_c(c)?,
                None => m,
            }
        }
        "inverse_sqrt_preset" => inverse_sqrt_preset(),
        "fit" | "fit_envelope" => {
            let fa = fa.ok_or_else(|| {
                Error::InvalidArgument("fitted models need the dense oracle (n above the oracle cap)".into())
            })?;
            let g = pattern_graph(a, false)?;
            let column = cfg.column.unwrap_or(a.n_rows() / 2);
            if column >= a.n_rows() {
                return Err(Error::InvalidArgument(format!("fit column {column} out of range")));
            }
            let (mags, dists) = column_decay_samples(fa, &g, column)?;
            let fit = if cfg.kind == "fit" {
                fit_decay_model(&mags, &dists, cfg.normal)?
            } else {
                fit_decay_envelope(&mags, &dists, cfg.normal)?
            };
            let mut m = fit.model;
            m.k = cfg.k.unwrap_or(crouzeix_constant(cfg.normal));
            m
        }
        other => return Err(Error::InvalidArgument(format!("unknown model kind '{other}'"))),
    };
    Ok(model)
}

/// A matrix with everything a sweep point reuses: Hermitian flag, dense
/// oracle (when within the cap) and decay model.
pub struct PreparedMatrix {
    label: String,
    a: SparseMatrix,
    hermitian: bool,
    oracle: Option<DenseMatrix>,
    model: Option<DecayModel>,
    dims: Option<Vec<usize>>,
}

impl PreparedMatrix {
    /// `hermitian = None` detects the flag from the entries.
    pub fn new(
        label: String,
        a: SparseMatrix,
        hermitian: Option<bool>,
        dims: Option<Vec<usize>>,
        cfg: &ExperimentConfig,
        f: &ScalarFunction,
    ) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!("matrix is {}x{}", a.n_rows(), a.n_cols())));
        }
        let hermitian = cfg.hermitian.or(hermitian).unwrap_or_else(|| detect_hermitian(&a));
        let cap = cfg.oracle_cap.unwrap_or(DEFAULT_ORACLE_CAP);
        let oracle = if a.n_rows() <= cap {
            Some(dense_reference(&a, f, hermitian, cap)?)
        } else {
            log::warn!("n = {} exceeds the oracle cap {cap}; reporting bounds only", a.n_rows());
            None
        };
        let model = cfg.model.as_ref().map(|m| build_model(m, &a, oracle.as_ref())).transpose()?;
        let dims = cfg.dims.clone().or(dims);
        Ok(Self { label, a, hermitian, oracle, model, dims })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn oracle(&self) -> Option<&DenseMatrix> {
        self.oracle.as_ref()
    }

    pub fn model(&self) -> Option<&DecayModel> {
        self.model.as_ref()
    }
}

fn prepare(cfg: &ExperimentConfig, n: Option<usize>, f: &ScalarFunction) -> Result<PreparedMatrix> {
    let family = match n {
        Some(n) => cfg.family.replace("{n}", &n.to_string()),
        None => cfg.family.clone(),
    };
    if family.contains("{n}") {
        return Err(Error::InvalidArgument("family uses {n} but no n is given".into()));
    }
    let spec: MatrixSpec = family.parse()?;
    let a = generate_matrix(&spec)?;
    PreparedMatrix::new(spec.to_string(), a, Some(spec.is_hermitian()), spec.lattice_dims(), cfg, f)
}

/// Result of one probing run; `approximation` is set for sparse tasks.
pub struct PointOutput {
    pub record: ExperimentRecord,
    pub approximation: Option<SparseMatrix>,
}

/// Runs `cfg` at its own `d` and `steps` on a prepared matrix, ignoring the
/// sweep section.
pub fn run_single(cfg: &ExperimentConfig, prep: &PreparedMatrix) -> Result<PointOutput> {
    let f: ScalarFunction = cfg.function.parse()?;
    let task = parse_task(&cfg.task)?;
    let steps: StepsSetting = cfg.steps.parse()?;
    let bound_kind = cfg.bound.as_deref().map(|b| BoundKind::parse(b, task)).transpose()?;
    run_point(cfg, prep, &f, task, cfg.d, steps, bound_kind)
}

fn parse_task(s: &str) -> Result<Task> {
    match s {
        "trace" => Ok(Task::Trace),
        "sparse" | "sparse-approx" => Ok(Task::Sparse),
        other => Err(Error::InvalidArgument(format!("unknown task '{other}'"))),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_point(
    cfg: &ExperimentConfig,
    prep: &PreparedMatrix,
    f: &ScalarFunction,
    task: Task,
    d: usize,
    steps: StepsSetting,
    bound_kind: Option<BoundKind>,
) -> Result<PointOutput> {
    let start = Instant::now();
    let a = &prep.a;
    let n = a.n_rows();
    let op = KrylovOperator::new(a, prep.hermitian)?;
    let choice = parse_coloring_choice(&cfg.coloring, cfg.beta, prep.dims.clone())?;
    let col = build_coloring(a, &choice, task, d)?;
    let eval = steps.evaluation(prep.oracle.as_ref());

    let mut approximation = None;
    let (estimate, exact, abs_error, s_steps) = match task {
        Task::Trace => {
            let t = estimate_trace(&op, f, &col, eval)?;
            let exact = prep.oracle.as_ref().map(|fa| fa.trace());
            (t.value.re, exact.map(|e| e.re), exact.map(|e| (e - t.value).norm()), t.krylov_steps)
        }
        Task::Sparse => {
            let approx = sparse_approximation(&op, f, d, &col, eval)?;
            let est = approx.matrix.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let norm = cfg.norm.or(bound_kind.map(BoundKind::natural_norm)).unwrap_or(ErrorNorm::Frobenius);
            let (exact, err) = match &prep.oracle {
                Some(fa) => {
                    let oracle = ProbingOracle::new(fa.clone())?;
                    let e = oracle.error_matrix(&approx)?;
                    let err = match norm {
                        ErrorNorm::Frobenius => e.norm(),
                        ErrorNorm::One => error_norms(&e).one,
                        ErrorNorm::Two => spectral_norm(&e),
                        ErrorNorm::Max => error_norms(&e).max,
                    };
                    (Some(fa.norm()), Some(err))
                }
                None => (None, None),
            };
            let steps = approx.krylov_steps;
            approximation = Some(approx.matrix);
            (est, exact, err, steps)
        }
    };

    let (bound, bound_label) = match (bound_kind, &prep.model) {
        (Some(kind), Some(model)) => {
            let ctx = BoundContext {
                n,
                d,
                steps: s_steps,
                coloring: &col,
                beta: cfg.beta.unwrap_or_else(|| a.semi_bandwidth()).max(1),
                dim: prep.dims.as_ref().map(Vec::len),
            };
            let req = bound_request(kind, &ctx)?;
            (Some(crate::bounds::evaluate_bound(model, &req)?), Some(model.bound_label()))
        }
        (Some(_), None) => return Err(Error::InvalidArgument("a bound needs a [model] section".into())),
        _ => (None, None),
    };

    let record = ExperimentRecord {
        family: prep.label.clone(),
        task: task.name(),
        n,
        f: f.name().to_string(),
        d,
        coloring: choice.name(),
        m_colors: col.num_colors(),
        s_steps,
        estimate,
        exact,
        abs_error,
        bound,
        bound_label,
        seconds: cfg.record_timing.then(|| start.elapsed().as_secs_f64()),
    };
    Ok(PointOutput { record, approximation })
}

/// Runs every sweep point and returns the records in sweep order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    let f: ScalarFunction = cfg.function.parse()?;
    let task = parse_task(&cfg.task)?;
    let steps: StepsSetting = cfg.steps.parse()?;
    let bound_kind = cfg.bound.as_deref().map(|b| BoundKind::parse(b, task)).transpose()?;
    if cfg.sweep.values.is_empty() {
        return Err(Error::InvalidArgument("sweep has no values".into()));
    }
    match cfg.sweep.variable.as_str() {
        "n" => cfg
            .sweep
            .values
            .par_iter()
            .map(|&n| {
                let prep = prepare(cfg, Some(n), &f)?;
                run_point(cfg, &prep, &f, task, cfg.d, steps, bound_kind).map(|p| p.record)
            })
            .collect(),
        "d" | "s" => {
            let prep = prepare(cfg, cfg.n, &f)?;
            let by_s = cfg.sweep.variable == "s";
            cfg.sweep
                .values
                .par_iter()
                .map(|&v| {
                    if by_s {
                        if v == 0 {
                            return Err(Error::InvalidArgument("step counts must be positive".into()));
                        }
                        run_point(cfg, &prep, &f, task, cfg.d, StepsSetting::Fixed(v), bound_kind)
                    } else {
                        run_point(cfg, &prep, &f, task, v, steps, bound_kind)
                    }
                    .map(|p| p.record)
                })
                .collect()
        }
        other => Err(Error::InvalidArgument(format!("sweep variable must be n, d or s, got '{other}'"))),
    }
}
