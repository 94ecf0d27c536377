//! Arnoldi decompositions and Krylov approximations of `f(A)b` and `vᴴf(A)v`.
//!
//! After `s` steps, `A Q_s = Q_s H_s + h_{s+1,s} q_{s+1} e_sᴴ` with an
//! orthonormal basis `Q_s` and an upper Hessenberg `H_s = Q_sᴴ A Q_s`. Then
//! `f(A)b ≈ ‖b‖ Q_s f(H_s) e_1`, exact for polynomials of degree `< s`, and
//! `vᴴf(A)v ≈ ‖v‖² e_1ᴴ f(H_s) e_1`, exact up to degree `2s − 1` when `A` is
//! Hermitian and up to degree `s` otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{dense_function, hermitian_function, ScalarFunction, HERMITIAN_TOL};
use crate::sparse::SparseMatrix;
use crate::{DenseMatrix, Error, Result, Scalar};

/// A step whose new direction keeps less than this fraction of `‖A q_j‖`
/// after orthogonalization signals an invariant subspace.
pub const BREAKDOWN_TOL: f64 = 1e-12;

const PROBE_SEED: u64 = 0x5_eed0_fa11;

pub(crate) fn inner(x: &[Scalar], y: &[Scalar]) -> Scalar {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub(crate) fn norm(x: &[Scalar]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// A square sparse matrix together with a verified Hermitian flag.
#[derive(Clone, Copy, Debug)]
pub struct KrylovOperator<'a> {
    matrix: &'a SparseMatrix,
    hermitian: bool,
}

impl<'a> KrylovOperator<'a> {
    /// Declares `matrix` Hermitian or not. A Hermitian declaration is checked
    /// once with random vectors `x, y` by comparing `⟨Ax, y⟩` with `⟨x, Ay⟩`.
    pub fn new(matrix: &'a SparseMatrix, hermitian: bool) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Krylov methods need a square matrix, got {}x{}",
                matrix.n_rows(),
                matrix.n_cols()
            )));
        }
        if hermitian && matrix.n_rows() > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
            let mut draw = || -> Vec<Scalar> {
                (0..matrix.n_rows())
                    .map(|_| Scalar::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect()
            };
            let (x, y) = (draw(), draw());
            let (ax, ay) = (matrix.matvec(&x)?, matrix.matvec(&y)?);
            let lhs = inner(&ax, &y);
            let rhs = inner(&x, &ay);
            let scale = norm(&ax) * norm(&y) + norm(&x) * norm(&ay);
            let mismatch = if scale > 0.0 { (lhs - rhs).norm() / scale } else { 0.0 };
            if mismatch > HERMITIAN_TOL {
                return Err(Error::NotHermitian(mismatch));
            }
        }
        Ok(Self { matrix, hermitian })
    }

    /// A non-Hermitian (general) operator; no check is needed.
    pub fn general(matrix: &'a SparseMatrix) -> Result<Self> {
        Self::new(matrix, false)
    }

    pub fn matrix(&self) -> &'a SparseMatrix {
        self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }
}

#[derive(Clone, Debug)]
pub struct ArnoldiDecomposition {
    /// `n × k` orthonormal basis.
    pub basis: DenseMatrix,
    /// `k × k` upper Hessenberg matrix.
    pub hessenberg: DenseMatrix,
    /// `h_{k+1,k}`, zero after a breakdown.
    pub next_subdiagonal: f64,
    /// `‖b‖₂`.
    pub beta0: f64,
    /// Number of steps after which the Krylov space became invariant.
    pub breakdown_at: Option<usize>,
}

impl ArnoldiDecomposition {
    pub fn steps(&self) -> usize {
        self.hessenberg.nrows()
    }

    /// The Krylov space is invariant, so approximations built from it are exact.
    pub fn is_exact(&self) -> bool {
        self.breakdown_at.is_some()
    }
}

/// `s` steps of Arnoldi with modified Gram–Schmidt and one full
/// reorthogonalization pass. Stops early, flagged exact, on breakdown.
pub fn arnoldi(op: &KrylovOperator, b: &[Scalar], s: usize) -> Result<ArnoldiDecomposition> {
    let n = op.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!("start vector has length {}, operator has {n} rows", b.len())));
    }
    if s == 0 || s > n {
        return Err(Error::InvalidArgument(format!("step count must lie in 1..={n}, got {s}")));
    }
    let beta0 = norm(b);
    if beta0 == 0.0 {
        return Err(Error::InvalidArgument("Arnoldi start vector is zero".into()));
    }

    let mut q: Vec<Vec<Scalar>> = vec![b.iter().map(|v| v / beta0).collect()];
    let mut h = DenseMatrix::zeros(s + 1, s);
    let mut w = vec![Scalar::new(0.0, 0.0); n];
    let mut breakdown_at = None;
    let mut steps = s;
    let mut next_subdiagonal = 0.0;
    for j in 0..s {
        op.matrix.apply(&q[j], &mut w);
        let before = norm(&w);
        for _pass in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = inner(qi, &w);
                for (wk, qk) in w.iter_mut().zip(qi) {
                    *wk -= c * qk;
                }
                h[(i, j)] += c;
            }
        }
        let after = norm(&w);
        if after <= BREAKDOWN_TOL * before || after == 0.0 {
            breakdown_at = Some(j + 1);
            steps = j + 1;
            break;
        }
        h[(j + 1, j)] = Scalar::new(after, 0.0);
        if j + 1 == s {
            next_subdiagonal = after;
            break;
        }
        q.push(w.iter().map(|v| v / after).collect());
    }

    let basis = DenseMatrix::from_fn(n, steps, |r, c| q[c][r]);
    let hessenberg = h.view((0, 0), (steps, steps)).into_owned();
    Ok(ArnoldiDecomposition { basis, hessenberg, next_subdiagonal, beta0, breakdown_at })
}

/// `f(H)` for a projected matrix; Hermitian operators go through the
/// eigendecomposition of the symmetrized `H`.
fn projected_function(op: &KrylovOperator, h: &DenseMatrix, f: &ScalarFunction) -> Result<DenseMatrix> {
    if op.hermitian && !f.is_polynomial() {
        hermitian_function(h, f)
    } else {
        dense_function(h, f)
    }
}

/// `f_s = ‖b‖ Q_s f(H_s) e_1`.
pub fn krylov_fun_vec(op: &KrylovOperator, b: &[Scalar], f: &ScalarFunction, s: usize) -> Result<Vec<Scalar>> {
    let dec = arnoldi(op, b, s)?;
    let fh = projected_function(op, &dec.hessenberg, f)?;
    let coeffs = fh.column(0) * Scalar::new(dec.beta0, 0.0);
    Ok((&dec.basis * coeffs).iter().copied().collect())
}

/// `α_s = ‖v‖² e_1ᴴ f(H_s) e_1`.
pub fn krylov_quadratic_form(op: &KrylovOperator, v: &[Scalar], f: &ScalarFunction, s: usize) -> Result<Scalar> {
    let dec = arnoldi(op, v, s)?;
    let fh = projected_function(op, &dec.hessenberg, f)?;
    Ok(fh[(0, 0)] * dec.beta0 * dec.beta0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepPurpose {
    SparseApprox,
    Trace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepRule {
    pub purpose: StepPurpose,
    pub hermitian: bool,
    pub d: usize,
}

/// Arnoldi steps matching the accuracy of a distance-d probing scheme:
/// `d + 1` for sparse approximation, `⌈(d+1)/2⌉` for Hermitian traces and
/// `d` for non-Hermitian traces. Never less than 1.
pub fn recommended_steps(rule: StepRule) -> usize {
    let s = match (rule.purpose, rule.hermitian) {
        (StepPurpose::SparseApprox, _) => rule.d + 1,
        (StepPurpose::Trace, true) => (rule.d + 1).div_ceil(2),
        (StepPurpose::Trace, false) => rule.d,
    };
    s.max(1)
}
