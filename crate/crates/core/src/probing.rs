//! Probing estimators for `tr(f(A))` and for a sparse approximation of `f(A)`.
//!
//! With color classes `V_1, ..., V_m` and probing vectors
//! `v_ℓ = Σ_{i∈V_ℓ} e_i`, the trace estimate is `T = Σ_ℓ v_ℓᴴ f(A) v_ℓ` and
//! `tr(f(A)) − T = −Σ_ℓ Σ_{i≠j∈V_ℓ} [f(A)]_ij`. The sparse approximation
//! `f(A)^[d]` takes entry `(i, j)`, `j ∈ V_ℓ`, from `[f(A)v_ℓ]_i` whenever
//! `d̄(i, j) <= d` in `|G(A)|`; a distance-2d coloring keeps the other
//! members of `V_ℓ` at least `d + 1` away, so only small entries pollute it.

use rayon::prelude::*;

use crate::bounds::{evaluate_bound, BoundRequest, DecayModel};
use crate::coloring::{Coloring, GraphMode};
use crate::dense::{matrix_function_dense, ScalarFunction};
use crate::graph::{pattern_graph, BallSearch};
use crate::krylov::{krylov_fun_vec, krylov_quadratic_form, recommended_steps, KrylovOperator, StepPurpose, StepRule};
use crate::sparse::SparseMatrix;
use crate::{DenseMatrix, Error, Result, Scalar};

/// Indicator vectors of the color classes of a coloring.
#[derive(Clone, Copy, Debug)]
pub struct ProbingVectors<'a> {
    coloring: &'a Coloring,
}

pub fn probing_vectors(col: &Coloring) -> ProbingVectors<'_> {
    ProbingVectors { coloring: col }
}

impl<'a> ProbingVectors<'a> {
    pub fn coloring(&self) -> &'a Coloring {
        self.coloring
    }

    pub fn len(&self) -> usize {
        self.coloring.num_colors()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `v_ℓ = Σ_{i∈V_ℓ} e_i`.
    pub fn vector(&self, l: usize) -> Vec<Scalar> {
        let mut v = vec![Scalar::new(0.0, 0.0); self.coloring.n()];
        for &i in &self.coloring.classes()[l] {
            v[i] = Scalar::new(1.0, 0.0);
        }
        v
    }

    pub fn to_vectors(&self) -> Vec<Vec<Scalar>> {
        (0..self.len()).map(|l| self.vector(l)).collect()
    }
}

/// How the products `f(A)v_ℓ` and quadratic forms `v_ℓᴴ f(A) v_ℓ` are obtained.
#[derive(Clone, Copy, Debug)]
pub enum Evaluation<'a> {
    /// Dense `f(A)` computed on the spot. Desk-scale testing only.
    Exact,
    /// A precomputed dense `f(A)`.
    Oracle(&'a DenseMatrix),
    /// Arnoldi/Lanczos with a fixed number of steps (capped at `n`).
    Krylov { steps: usize },
    /// Arnoldi/Lanczos with the recommended step count for the task.
    KrylovAuto,
}

enum Resolved<'a> {
    Dense(std::borrow::Cow<'a, DenseMatrix>),
    Krylov(usize),
}

fn resolve<'a>(
    op: &KrylovOperator,
    f: &ScalarFunction,
    eval: Evaluation<'a>,
    purpose: StepPurpose,
    d: usize,
) -> Result<Resolved<'a>> {
    let n = op.n();
    Ok(match eval {
        Evaluation::Exact => {
            Resolved::Dense(std::borrow::Cow::Owned(matrix_function_dense(op.matrix(), f, op.is_hermitian())?))
        }
        Evaluation::Oracle(fa) => {
            if fa.shape() != (n, n) {
                return Err(Error::DimensionMismatch(format!("oracle is {:?}, operator is {n}x{n}", fa.shape())));
            }
            Resolved::Dense(std::borrow::Cow::Borrowed(fa))
        }
        Evaluation::Krylov { steps } => {
            if steps == 0 {
                return Err(Error::InvalidArgument("Krylov step count must be positive".into()));
            }
            Resolved::Krylov(steps.min(n))
        }
        Evaluation::KrylovAuto => {
            let s = recommended_steps(StepRule { purpose, hermitian: op.is_hermitian(), d });
            Resolved::Krylov(s.min(n))
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttachedBound {
    pub kind: &'static str,
    pub value: f64,
    /// `rigorous` or `estimate`.
    pub label: &'static str,
}

impl AttachedBound {
    pub fn compute(model: &DecayModel, req: &BoundRequest) -> Result<Self> {
        Ok(Self { kind: req.kind(), value: evaluate_bound(model, req)?, label: model.bound_label() })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEstimate {
    pub value: Scalar,
    /// Number of probing vectors.
    pub m: usize,
    pub per_class_terms: Vec<Scalar>,
    /// `None` for dense evaluation.
    pub krylov_steps: Option<usize>,
    pub bound: Option<AttachedBound>,
}

impl TraceEstimate {
    pub fn with_bound(mut self, model: &DecayModel, req: &BoundRequest) -> Result<Self> {
        self.bound = Some(AttachedBound::compute(model, req)?);
        Ok(self)
    }
}

fn check_size(op: &KrylovOperator, col: &Coloring) -> Result<()> {
    if col.n() != op.n() {
        return Err(Error::DimensionMismatch(format!("coloring has {} nodes, matrix has {} rows", col.n(), op.n())));
    }
    Ok(())
}

/// `T = Σ_ℓ v_ℓᴴ f(A) v_ℓ`. The coloring should be a distance-d coloring of
/// `G(A)`; an undirected certificate also qualifies since `d̄ <= d`.
/// Per-class terms are computed in parallel and summed in class order.
pub fn estimate_trace(
    op: &KrylovOperator,
    f: &ScalarFunction,
    col: &Coloring,
    eval: Evaluation,
) -> Result<TraceEstimate> {
    check_size(op, col)?;
    let pv = probing_vectors(col);
    let resolved = resolve(op, f, eval, StepPurpose::Trace, col.certified_distance())?;
    let (terms, steps) = match &resolved {
        Resolved::Dense(fa) => {
            let terms = col
                .classes()
                .par_iter()
                .map(|class| class.iter().flat_map(|&i| class.iter().map(move |&j| fa[(i, j)])).sum())
                .collect();
            (terms, None)
        }
        Resolved::Krylov(s) => {
            let terms = (0..pv.len())
                .into_par_iter()
                .map(|l| krylov_quadratic_form(op, &pv.vector(l), f, *s))
                .collect::<Result<Vec<Scalar>>>()?;
            (terms, Some(*s))
        }
    };
    let value = terms.iter().sum();
    Ok(TraceEstimate { value, m: pv.len(), per_class_terms: terms, krylov_steps: steps, bound: None })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseFunctionApprox {
    /// `f(A)^[d]`, stored on the distance-≤d pattern of `|G(A)|`.
    pub matrix: SparseMatrix,
    pub d: usize,
    pub m: usize,
    /// `None` for dense evaluation.
    pub krylov_steps: Option<usize>,
}

/// Builds `f(A)^[d]` from `m` products `f(A)v_ℓ`. Needs a coloring of
/// `|G(A)|` certified at distance `2d` or more.
pub fn sparse_approximation(
    op: &KrylovOperator,
    f: &ScalarFunction,
    d: usize,
    col: &Coloring,
    eval: Evaluation,
) -> Result<SparseFunctionApprox> {
    check_size(op, col)?;
    if col.mode() != GraphMode::Undirected || col.certified_distance() < 2 * d {
        return Err(Error::InvalidArgument(format!(
            "sparse approximation at distance {d} needs an undirected distance-{} coloring, got a {:?} distance-{} coloring",
            2 * d,
            col.mode(),
            col.certified_distance()
        )));
    }
    let n = op.n();
    let g = pattern_graph(op.matrix(), false)?;
    let pv = probing_vectors(col);
    let resolved = resolve(op, f, eval, StepPurpose::SparseApprox, d)?;

    let product = |l: usize| -> Result<Vec<Scalar>> {
        match &resolved {
            Resolved::Dense(fa) => {
                let mut w = vec![Scalar::new(0.0, 0.0); n];
                for &j in &col.classes()[l] {
                    for (wi, fij) in w.iter_mut().zip(fa.column(j).iter()) {
                        *wi += fij;
                    }
                }
                Ok(w)
            }
            Resolved::Krylov(s) => krylov_fun_vec(op, &pv.vector(l), f, *s),
        }
    };

    let blocks = (0..pv.len())
        .into_par_iter()
        .map_init(
            || BallSearch::new(n),
            |search, l| -> Result<Vec<(usize, usize, Scalar)>> {
                let w = product(l)?;
                let mut entries = Vec::new();
                for &j in &col.classes()[l] {
                    entries.extend(search.ball(g.out_lists(), j, d).iter().map(|&(i, _)| (i, j, w[i])));
                }
                Ok(entries)
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let matrix = SparseMatrix::from_triplets(n, n, blocks.into_iter().flatten())?;
    let krylov_steps = match resolved {
        Resolved::Dense(_) => None,
        Resolved::Krylov(s) => Some(s),
    };
    Ok(SparseFunctionApprox { matrix, d, m: pv.len(), krylov_steps })
}

/// Error norms of `f(A) − f(A)^[d]`. The spectral norm is iterative and
/// left to [`spectral_norm`]; it never exceeds `frobenius`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub frobenius: f64,
    /// Maximum column sum.
    pub one: f64,
    /// Largest entry magnitude.
    pub max: f64,
}

/// Scores probing results against a dense `f(A)`.
#[derive(Clone, Debug)]
pub struct ProbingOracle {
    fa: DenseMatrix,
}

impl ProbingOracle {
    pub fn new(fa: DenseMatrix) -> Result<Self> {
        if !fa.is_square() {
            return Err(Error::DimensionMismatch("oracle matrix must be square".into()));
        }
        Ok(Self { fa })
    }

    /// Dense `f(A)` from the operator.
    pub fn compute(op: &KrylovOperator, f: &ScalarFunction) -> Result<Self> {
        Self::new(matrix_function_dense(op.matrix(), f, op.is_hermitian())?)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.fa
    }

    pub fn trace(&self) -> Scalar {
        self.fa.trace()
    }

    /// `|tr(f(A)) − T|`.
    pub fn trace_error(&self, est: &TraceEstimate) -> f64 {
        (self.trace() - est.value).norm()
    }

    /// `f(A) − f(A)^[d]` as a dense matrix.
    pub fn error_matrix(&self, approx: &SparseFunctionApprox) -> Result<DenseMatrix> {
        if approx.matrix.n_rows() != self.fa.nrows() {
            return Err(Error::DimensionMismatch("approximation and oracle sizes differ".into()));
        }
        let mut e = self.fa.clone();
        for (i, j, v) in approx.matrix.triplets() {
            e[(i, j)] -= v;
        }
        Ok(e)
    }

    pub fn sparse_errors(&self, approx: &SparseFunctionApprox) -> Result<ErrorNorms> {
        Ok(error_norms(&self.error_matrix(approx)?))
    }
}

/// Frobenius, 1- and max norms of a dense matrix.
pub fn error_norms(e: &DenseMatrix) -> ErrorNorms {
    let frobenius = e.norm();
    let one = e.column_iter().map(|c| c.iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max);
    let max = e.iter().map(|v| v.norm()).fold(0.0, f64::max);
    ErrorNorms { frobenius, one, max }
}

/// Largest singular value by power iteration on `EᴴE`.
pub fn spectral_norm(e: &DenseMatrix) -> f64 {
    let n = e.ncols();
    if n == 0 || e.norm() == 0.0 {
        return 0.0;
    }
    // Deterministic start with no special alignment to the data.
    let mut x = nalgebra::DVector::from_fn(n, |i, _| Scalar::new(1.0 + (i as f64 * 0.618).fract(), 0.0));
    x /= Scalar::new(x.norm(), 0.0);
    let eh = e.adjoint();
    let mut sigma = 0.0;
    for _ in 0..1000 {
        let y = &eh * (e * &x);
        let ny = y.norm();
        if ny == 0.0 {
            return 0.0;
        }
        let next = ny.sqrt();
        x = y / Scalar::new(ny, 0.0);
        if (next - sigma).abs() <= 1e-12 * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// Exact error of a probing result, using a dense `f(A)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbingError {
    Trace(f64),
    Sparse(ErrorNorms),
}

pub enum ProbingResult<'r> {
    Trace(&'r TraceEstimate),
    Sparse(&'r SparseFunctionApprox),
}

/// Scores `result` against a dense `f(A)` computed from `op`.
pub fn probing_error_exact(op: &KrylovOperator, f: &ScalarFunction, result: ProbingResult) -> Result<ProbingError> {
    let oracle = ProbingOracle::compute(op, f)?;
    Ok(match result {
        ProbingResult::Trace(t) => ProbingError::Trace(oracle.trace_error(t)),
        ProbingResult::Sparse(s) => ProbingError::Sparse(oracle.sparse_errors(s)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::decay_model_inverse_hpd;
    use crate::coloring::{banded_coloring, greedy_coloring, ColoringMethod};
    use crate::dense::horner;
    use crate::graph::bfs_distances;
    use crate::harness::{generate_matrix, random_sparse_matrix, MatrixSpec};

    fn c(x: f64) -> Scalar {
        Scalar::new(x, 0.0)
    }

    fn tridiag(n: usize) -> SparseMatrix {
        generate_matrix(&MatrixSpec::Tridiag { n, sub: c(-1.0), diag: c(4.0), sup: c(-1.0) }).unwrap()
    }

    #[test]
    fn one_color_gives_all_ones() {
        let col = Coloring::from_assignment(vec![0; 4], 1, ColoringMethod::Given, GraphMode::Undirected);
        let pv = probing_vectors(&col);
        assert_eq!(pv.len(), 1);
        assert_eq!(pv.vector(0), vec![c(1.0); 4]);
    }

    #[test]
    fn banded_probing_vectors() {
        let col = banded_coloring(6, 1, 2).unwrap();
        let v = probing_vectors(&col).to_vectors();
        let e = |idx: &[usize]| (0..6).map(|i| c(if idx.contains(&i) { 1.0 } else { 0.0 })).collect::<Vec<_>>();
        assert_eq!(v, vec![e(&[0, 3]), e(&[1, 4]), e(&[2, 5])]);
    }

    #[test]
    fn partition_of_unity() {
        let a = tridiag(40);
        let col = banded_coloring(40, 1, 3).unwrap();
        let fa = matrix_function_dense(&a, &ScalarFunction::Exp, true).unwrap();
        let mut sum = nalgebra::DVector::<Scalar>::zeros(40);
        for v in probing_vectors(&col).to_vectors() {
            sum += &fa * nalgebra::DVector::from_vec(v);
        }
        let want = &fa * nalgebra::DVector::from_element(40, c(1.0));
        assert!((sum - want).norm() <= 1e-10 * fa.norm());
    }

    #[test]
    fn polynomial_trace_is_exact() {
        let a = tridiag(50);
        let op = KrylovOperator::new(&a, true).unwrap();
        let p = vec![c(0.5), c(1.0), c(-0.2), c(0.03)];
        let f = ScalarFunction::polynomial(p.clone());
        let col = banded_coloring(50, 1, 3).unwrap();
        let t = estimate_trace(&op, &f, &col, Evaluation::Exact).unwrap();
        let tr = horner(&a.to_dense(), &p).trace();
        assert!((t.value - tr).norm() <= 1e-9);
        let tk = estimate_trace(&op, &f, &col, Evaluation::Krylov { steps: 2 }).unwrap();
        assert!((tk.value - tr).norm() <= 1e-9);
        assert_eq!(tk.krylov_steps, Some(2));
    }

    #[test]
    fn diagonal_matrix_trace_is_exact() {
        let diag: Vec<Scalar> = (1..=10).map(|k| c(k as f64)).collect();
        let a = SparseMatrix::from_diagonal(&diag);
        let op = KrylovOperator::new(&a, true).unwrap();
        let col = Coloring::from_assignment(vec![0; 10], 1, ColoringMethod::Given, GraphMode::Undirected);
        let t = estimate_trace(&op, &ScalarFunction::Log, &col, Evaluation::Exact).unwrap();
        let want: f64 = (1..=10).map(|k| (k as f64).ln()).sum();
        assert!((t.value - c(want)).norm() <= 1e-10);
    }

    #[test]
    fn zero_matrix_exp_trace() {
        let a = SparseMatrix::zeros(6, 6);
        let op = KrylovOperator::new(&a, true).unwrap();
        let col = Coloring::from_assignment(vec![0, 1, 0, 1, 0, 1], 1, ColoringMethod::Given, GraphMode::Undirected);
        let t = estimate_trace(&op, &ScalarFunction::Exp, &col, Evaluation::Exact).unwrap();
        match probing_error_exact(&op, &ScalarFunction::Exp, ProbingResult::Trace(&t)).unwrap() {
            ProbingError::Trace(e) => assert!(e <= 1e-14),
            _ => unreachable!(),
        }
    }

    #[test]
    fn trace_identity_holds() {
        let a = tridiag(60);
        let op = KrylovOperator::new(&a, true).unwrap();
        let col = banded_coloring(60, 1, 2).unwrap();
        let oracle = ProbingOracle::compute(&op, &ScalarFunction::Inverse).unwrap();
        let t = estimate_trace(&op, &ScalarFunction::Inverse, &col, Evaluation::Oracle(oracle.matrix())).unwrap();
        let fa = oracle.matrix();
        let off: Scalar = col
            .classes()
            .iter()
            .map(|cl| {
                cl.iter().flat_map(|&i| cl.iter().filter(move |&&j| j != i).map(move |&j| fa[(i, j)])).sum::<Scalar>()
            })
            .sum();
        assert!((oracle.trace() - t.value + off).norm() <= 1e-12);
    }

    #[test]
    fn banded_trace_bound_example() {
        let n = 1000;
        let a = tridiag(n);
        let op = KrylovOperator::new(&a, true).unwrap();
        let col = banded_coloring(n, 1, 5).unwrap();
        let model = decay_model_inverse_hpd(2.0, 6.0).unwrap();
        let t = estimate_trace(&op, &ScalarFunction::Inverse, &col, Evaluation::Exact)
            .unwrap()
            .with_bound(&model, &BoundRequest::TraceBanded { n, d: 5 })
            .unwrap();
        let oracle = ProbingOracle::compute(&op, &ScalarFunction::Inverse).unwrap();
        let bound = t.bound.as_ref().unwrap();
        assert_eq!(bound.label, "rigorous");
        assert!(oracle.trace_error(&t) <= bound.value);
    }

    #[test]
    fn sparse_polynomial_is_exact() {
        let a = tridiag(30);
        let op = KrylovOperator::new(&a, true).unwrap();
        let p = vec![c(1.0), c(0.5), c(-0.25)];
        let d = 2;
        let col = banded_coloring(30, 1, 2 * d).unwrap();
        let approx =
            sparse_approximation(&op, &ScalarFunction::polynomial(p.clone()), d, &col, Evaluation::Exact).unwrap();
        let pa = horner(&a.to_dense(), &p);
        assert!((approx.matrix.to_dense() - pa).norm() <= 1e-9);
        assert_eq!(approx.matrix.semi_bandwidth(), d);
    }

    #[test]
    fn sparse_needs_distance_2d() {
        let a = tridiag(10);
        let op = KrylovOperator::new(&a, true).unwrap();
        let col = banded_coloring(10, 1, 3).unwrap();
        assert!(matches!(
            sparse_approximation(&op, &ScalarFunction::Inverse, 2, &col, Evaluation::Exact),
            Err(Error::InvalidArgument(_))
        ));
        let g = pattern_graph(&a, true).unwrap();
        let directed = greedy_coloring(&g, 4, None).unwrap();
        assert!(sparse_approximation(&op, &ScalarFunction::Inverse, 2, &directed, Evaluation::Exact).is_err());
    }

    #[test]
    fn full_distance_recovers_dense_function() {
        let a = tridiag(8);
        let op = KrylovOperator::new(&a, true).unwrap();
        let col = Coloring::from_assignment((0..8).collect(), 100, ColoringMethod::Given, GraphMode::Undirected);
        let approx = sparse_approximation(&op, &ScalarFunction::Exp, 7, &col, Evaluation::Exact).unwrap();
        let fa = matrix_function_dense(&a, &ScalarFunction::Exp, true).unwrap();
        assert!((approx.matrix.to_dense() - fa).norm() <= 1e-12);
    }

    #[test]
    fn kept_pattern_is_the_distance_ball() {
        let a = random_sparse_matrix(40, 3, true, 17);
        let op = KrylovOperator::new(&a, true).unwrap();
        let g = pattern_graph(&a, false).unwrap();
        let d = 1;
        let col = greedy_coloring(&g, 2 * d, None).unwrap();
        let approx =
            sparse_approximation(&op, &ScalarFunction::polynomial(vec![c(1.0), c(1.0)]), d, &col, Evaluation::Exact)
                .unwrap();
        for j in 0..40 {
            let dist = bfs_distances(&g, j, None).unwrap();
            for i in 0..40 {
                let kept = approx.matrix.get(i, j) != c(0.0);
                if kept {
                    assert!(dist[i] as usize <= d);
                }
            }
        }
    }

    #[test]
    fn krylov_and_exact_agree_for_large_steps() {
        let a = tridiag(100);
        let op = KrylovOperator::new(&a, true).unwrap();
        let col = banded_coloring(100, 1, 6).unwrap();
        let exact = sparse_approximation(&op, &ScalarFunction::Inverse, 3, &col, Evaluation::Exact).unwrap();
        let kry =
            sparse_approximation(&op, &ScalarFunction::Inverse, 3, &col, Evaluation::Krylov { steps: 30 }).unwrap();
        assert!((exact.matrix.to_dense() - kry.matrix.to_dense()).norm() <= 1e-10);
        assert_eq!(kry.krylov_steps, Some(30));
    }

    #[test]
    fn spectral_norm_matches_singular_values() {
        let e = DenseMatrix::from_fn(12, 12, |i, j| {
            Scalar::new(((i * 7 + j * 3) % 5) as f64 - 2.0, (i as f64 - j as f64) * 0.1)
        });
        let sv = e.clone().singular_values().max();
        assert!((spectral_norm(&e) - sv).abs() <= 1e-9 * sv);
    }

    #[test]
    fn entrywise_bound_on_tridiagonal() {
        let n = 200;
        let a = tridiag(n);
        let op = KrylovOperator::new(&a, true).unwrap();
        let model = decay_model_inverse_hpd(2.0, 6.0).unwrap();
        let g = pattern_graph(&a, false).unwrap();
        for d in 1..=4 {
            let col = banded_coloring(n, 1, 2 * d).unwrap();
            let approx = sparse_approximation(&op, &ScalarFunction::Inverse, d, &col, Evaluation::Exact).unwrap();
            let oracle = ProbingOracle::compute(&op, &ScalarFunction::Inverse).unwrap();
            let e = oracle.error_matrix(&approx).unwrap();
            let eps = model.epsilon(d);
            for j in 0..n {
                let dist = bfs_distances(&g, j, None).unwrap();
                let size = col.classes()[col.color_of()[j]].len() as f64;
                for i in 0..n {
                    let bound = if dist[i] as usize <= d { (size - 1.0) * eps } else { eps };
                    assert!(e[(i, j)].norm() <= bound * (1.0 + 1e-9) + 1e-15, "d={d} ({i},{j})");
                }
            }
        }
    }
}
