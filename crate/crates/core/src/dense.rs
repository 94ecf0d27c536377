//! Scalar functions and their evaluation on small dense matrices.
//!
//! Three evaluation routes are available:
//!
//! - Hermitian matrices: eigendecomposition `U diag(f(λ)) Uᴴ`.
//! - General matrices: complex Schur form `Q T Qᴴ` followed by the Parlett
//!   recurrence on the triangular factor.
//! - The inverse always goes through an LU factorization and polynomials
//!   through Horner's scheme.
//!
//! [`matrix_function_dense`] applies the same routes to a whole sparse matrix
//! and serves as the desk-scale oracle for the probing estimates.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, Schur, SymmetricEigen};

use crate::sparse::SparseMatrix;
use crate::{DenseMatrix, Error, Result, Scalar};

/// Relative gap below which the Parlett recurrence refuses to divide.
pub const PARLETT_GAP_TOL: f64 = 1e-10;

/// Relative deviation from Hermitian symmetry tolerated by [`dense_function`]
/// before it switches to the Schur route.
pub const HERMITIAN_TOL: f64 = 1e-10;

type CustomFn = Arc<dyn Fn(Scalar) -> Scalar + Send + Sync>;

/// The scalar `f` in `f(A)`. Log and inverse square root use principal branches.
#[derive(Clone)]
pub enum ScalarFunction {
    Inverse,
    InverseSqrt,
    Log,
    Exp,
    /// Coefficients in ascending order: `c[0] + c[1] z + ...`.
    Polynomial(Vec<Scalar>),
    /// User supplied closure. Only usable on Hermitian matrices, where the
    /// eigendecomposition route applies.
    Custom {
        name: String,
        f: CustomFn,
    },
}

impl ScalarFunction {
    pub fn polynomial(coefficients: Vec<Scalar>) -> Self {
        ScalarFunction::Polynomial(coefficients)
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(Scalar) -> Scalar + Send + Sync + 'static) -> Self {
        ScalarFunction::Custom { name: name.into(), f: Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        match self {
            ScalarFunction::Inverse => "inv",
            ScalarFunction::InverseSqrt => "invsqrt",
            ScalarFunction::Log => "log",
            ScalarFunction::Exp => "exp",
            ScalarFunction::Polynomial(_) => "poly",
            ScalarFunction::Custom { name, .. } => name,
        }
    }

    /// Evaluates `f(z)`, rejecting points where `f` is undefined or sits on
    /// the branch cut.
    pub fn eval(&self, z: Scalar) -> Result<Scalar> {
        let on_cut = || z.re <= 0.0 && z.im.abs() <= 1e-12 * z.norm().max(1.0);
        match self {
            ScalarFunction::Inverse => {
                if z.norm() == 0.0 {
                    Err(Error::Domain("inverse of a zero eigenvalue".into()))
                } else {
                    Ok(z.inv())
                }
            }
            ScalarFunction::InverseSqrt => {
                if on_cut() {
                    Err(Error::Domain(format!("inverse square root at {z} (nonpositive real axis)")))
                } else {
                    Ok(z.sqrt().inv())
                }
            }
            ScalarFunction::Log => {
                if on_cut() {
                    Err(Error::Domain(format!("logarithm at {z} (nonpositive real axis)")))
                } else {
                    Ok(z.ln())
                }
            }
            ScalarFunction::Exp => Ok(z.exp()),
            ScalarFunction::Polynomial(c) => Ok(c.iter().rev().fold(Scalar::new(0.0, 0.0), |acc, &ci| acc * z + ci)),
            ScalarFunction::Custom { f, .. } => Ok(f(z)),
        }
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self, ScalarFunction::Polynomial(_))
    }
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFunction::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for ScalarFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inv" | "inverse" => Ok(ScalarFunction::Inverse),
            "invsqrt" | "inverse_sqrt" => Ok(ScalarFunction::InverseSqrt),
            "log" => Ok(ScalarFunction::Log),
            "exp" => Ok(ScalarFunction::Exp),
            other => Err(Error::InvalidArgument(format!("unknown function '{other}'"))),
        }
    }
}

fn check_square(h: &DenseMatrix) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", h.nrows(), h.ncols())));
    }
    Ok(())
}

/// `‖H - Hᴴ‖_F <= tol ‖H‖_F`.
pub fn is_hermitian(h: &DenseMatrix, tol: f64) -> bool {
    h.nrows() == h.ncols() && (h - h.adjoint()).norm() <= tol * h.norm()
}

/// `f(H)`, picking the route from the structure of `H` and the kind of `f`.
pub fn dense_function(h: &DenseMatrix, f: &ScalarFunction) -> Result<DenseMatrix> {
    check_square(h)?;
    match f {
        ScalarFunction::Polynomial(c) => Ok(horner(h, c)),
        ScalarFunction::Inverse => dense_inverse(h),
        _ if is_hermitian(h, HERMITIAN_TOL) => hermitian_function(h, f),
        ScalarFunction::Custom { name, .. } => {
            Err(Error::Unsupported(format!("custom function '{name}' needs a Hermitian matrix")))
        }
        _ => schur_parlett(h, f),
    }
}

/// `f(H)` for Hermitian `H` via eigendecomposition. `H` is symmetrized first,
/// so roundoff-level asymmetry (e.g. from Arnoldi on a Hermitian operator)
/// is harmless. Polynomials and the inverse also go through the eigenvalues here.
pub fn hermitian_function(h: &DenseMatrix, f: &ScalarFunction) -> Result<DenseMatrix> {
    check_square(h)?;
    let sym = (h + h.adjoint()) * Scalar::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let fvals = eig.eigenvalues.iter().map(|&lam| f.eval(Scalar::new(lam, 0.0))).collect::<Result<Vec<_>>>()?;
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, fv) in fvals.iter().enumerate() {
        let mut col = scaled.column_mut(j);
        col *= *fv;
    }
    Ok(scaled * u.adjoint())
}

/// `f(H)` through the complex Schur form and the Parlett recurrence
///
/// `F_ij = [T_ij (F_jj - F_ii) + Σ_{i<k<j} (T_ik F_kj - F_ik T_kj)] / (T_jj - T_ii)`.
///
/// Fails with [`Error::IllConditioned`] when two eigenvalues are closer than
/// [`PARLETT_GAP_TOL`] relative to the spectral scale.
pub fn schur_parlett(h: &DenseMatrix, f: &ScalarFunction) -> Result<DenseMatrix> {
    check_square(h)?;
    let n = h.nrows();
    let (q, t) = Schur::new(h.clone()).unpack();
    let scale = (0..n).map(|i| t[(i, i)].norm()).fold(1.0_f64, f64::max);

    let mut fm = DenseMatrix::zeros(n, n);
    for i in 0..n {
        fm[(i, i)] = f.eval(t[(i, i)])?;
    }
    for j in 1..n {
        for i in (0..j).rev() {
            let gap = t[(j, j)] - t[(i, i)];
            if gap.norm() <= PARLETT_GAP_TOL * scale {
                return Err(Error::IllConditioned(format!(
                    "eigenvalues {} and {} are too close for the Parlett recurrence",
                    t[(i, i)],
                    t[(j, j)]
                )));
            }
            let mut s = t[(i, j)] * (fm[(j, j)] - fm[(i, i)]);
            for k in i + 1..j {
                s += t[(i, k)] * fm[(k, j)] - fm[(i, k)] * t[(k, j)];
            }
            fm[(i, j)] = s / gap;
        }
    }
    Ok(&q * fm * q.adjoint())
}

/// `p(H)` by Horner's scheme, coefficients ascending.
pub fn horner(h: &DenseMatrix, coefficients: &[Scalar]) -> DenseMatrix {
    let n = h.nrows();
    let mut acc = DenseMatrix::zeros(n, n);
    for &c in coefficients.iter().rev() {
        acc = &acc * h;
        for i in 0..n {
            acc[(i, i)] += c;
        }
    }
    acc
}

fn dense_inverse(h: &DenseMatrix) -> Result<DenseMatrix> {
    h.clone().lu().try_inverse().ok_or_else(|| Error::Domain("matrix is singular; inverse undefined".into()))
}

/// Dense `f(A)` for a sparse `A`, used as the reference oracle.
///
/// Real symmetric matrices take a real eigendecomposition (or a real LU for
/// the inverse), which is several times cheaper than the complex routes.
/// `hermitian` is the caller's structural claim; it selects the eigen route
/// for non-polynomial functions.
pub fn matrix_function_dense(a: &SparseMatrix, f: &ScalarFunction, hermitian: bool) -> Result<DenseMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("matrix function of a non-square matrix".into()));
    }
    let n = a.n_rows();
    let real = a.is_real();
    match f {
        ScalarFunction::Polynomial(c) => Ok(horner(&a.to_dense(), c)),
        ScalarFunction::Inverse if real => {
            let ar = real_dense(a);
            let inv = ar.lu().try_inverse().ok_or_else(|| Error::Domain("matrix is singular".into()))?;
            Ok(inv.map(|v| Scalar::new(v, 0.0)))
        }
        ScalarFunction::Inverse => dense_inverse(&a.to_dense()),
        _ if hermitian && real => {
            let eig = SymmetricEigen::new(real_dense(a));
            let fvals = eig.eigenvalues.iter().map(|&lam| f.eval(Scalar::new(lam, 0.0))).collect::<Result<Vec<_>>>()?;
            let u = &eig.eigenvectors;
            let re: Vec<f64> = fvals.iter().map(|v| v.re).collect();
            let mut scaled = u.clone();
            for j in 0..n {
                scaled.column_mut(j).scale_mut(re[j]);
            }
            let mut out = (scaled * u.transpose()).map(|v| Scalar::new(v, 0.0));
            if fvals.iter().any(|v| v.im != 0.0) {
                let mut scaled = u.clone();
                for j in 0..n {
                    scaled.column_mut(j).scale_mut(fvals[j].im);
                }
                let im = scaled * u.transpose();
                for (o, v) in out.iter_mut().zip(im.iter()) {
                    o.im = *v;
                }
            }
            Ok(out)
        }
        _ if hermitian => hermitian_function(&a.to_dense(), f),
        _ => dense_function(&a.to_dense(), f),
    }
}

fn real_dense(a: &SparseMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::zeros(a.n_rows(), a.n_cols());
    for (i, j, v) in a.triplets() {
        d[(i, j)] = v.re;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Scalar {
        Scalar::new(re, 0.0)
    }

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |_, _| Scalar::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn rel_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn diagonal_inverse_sqrt() {
        let h = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(4.0)]));
        let f = dense_function(&h, &ScalarFunction::InverseSqrt).unwrap();
        assert!((f[(0, 0)] - c(1.0)).norm() < 1e-15);
        assert!((f[(1, 1)] - c(0.5)).norm() < 1e-15);
        assert!(f[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn exp_of_identity() {
        let f = dense_function(&DenseMatrix::identity(4, 4), &ScalarFunction::Exp).unwrap();
        let expected = DenseMatrix::identity(4, 4) * c(std::f64::consts::E);
        assert!(rel_diff(&f, &expected) < 1e-15);
    }

    #[test]
    fn triangular_inverse_matches_hand_inversion() {
        let h = DenseMatrix::from_row_slice(2, 2, &[c(2.0), c(1.0), c(0.0), c(3.0)]);
        let f = dense_function(&h, &ScalarFunction::Inverse).unwrap();
        let expected = DenseMatrix::from_row_slice(2, 2, &[c(0.5), c(-1.0 / 6.0), c(0.0), c(1.0 / 3.0)]);
        assert!(rel_diff(&f, &expected) < 1e-15);
    }

    #[test]
    fn log_of_negative_eigenvalue_is_domain_error() {
        let h = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(-2.0)]));
        assert!(matches!(dense_function(&h, &ScalarFunction::Log), Err(Error::Domain(_))));
    }

    #[test]
    fn jordan_block_is_ill_conditioned_for_parlett() {
        let h = DenseMatrix::from_row_slice(2, 2, &[c(2.0), c(1.0), c(0.0), c(2.0)]);
        assert!(matches!(dense_function(&h, &ScalarFunction::Exp), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn custom_needs_hermitian() {
        let f = ScalarFunction::custom("square", |z| z * z);
        let h = DenseMatrix::from_row_slice(2, 2, &[c(2.0), c(1.0), c(0.0), c(3.0)]);
        assert!(matches!(dense_function(&h, &f), Err(Error::Unsupported(_))));
        let s = DenseMatrix::from_row_slice(2, 2, &[c(2.0), c(1.0), c(1.0), c(3.0)]);
        let out = dense_function(&s, &f).unwrap();
        assert!(rel_diff(&out, &(&s * &s)) < 1e-13);
    }

    #[test]
    fn parlett_and_eigen_routes_agree_with_horner() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let h = random_matrix(8, &mut rng);
            let coeffs: Vec<Scalar> =
                (0..5).map(|_| Scalar::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let p = ScalarFunction::Polynomial(coeffs.clone());
            let reference = horner(&h, &coeffs);
            assert!(rel_diff(&dense_function(&h, &p).unwrap(), &reference) < 1e-10);
            assert!(rel_diff(&schur_parlett(&h, &p).unwrap(), &reference) < 1e-10);

            let herm = &h + h.adjoint();
            let reference = horner(&herm, &coeffs);
            assert!(rel_diff(&hermitian_function(&herm, &p).unwrap(), &reference) < 1e-10);
        }
    }

    #[test]
    fn parlett_exp_matches_eigen_route_on_hermitian_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_matrix(6, &mut rng);
        let herm = &h + h.adjoint();
        let a = schur_parlett(&herm, &ScalarFunction::Exp).unwrap();
        let b = hermitian_function(&herm, &ScalarFunction::Exp).unwrap();
        assert!(rel_diff(&a, &b) < 1e-11);
    }

    #[test]
    fn log_inverts_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_matrix(6, &mut rng) * c(0.3);
        let e = schur_parlett(&h, &ScalarFunction::Exp).unwrap();
        let back = schur_parlett(&e, &ScalarFunction::Log).unwrap();
        assert!(rel_diff(&back, &h) < 1e-10);
    }

    #[test]
    fn sparse_oracle_real_path_matches_complex_path() {
        let a = SparseMatrix::from_triplets(
            4,
            4,
            (0..4).flat_map(|i| {
                let mut v = vec![(i, i, c(4.0))];
                if i > 0 {
                    v.push((i, i - 1, c(-1.0)));
                    v.push((i - 1, i, c(-1.0)));
                }
                v
            }),
        )
        .unwrap();
        for f in [ScalarFunction::Log, ScalarFunction::InverseSqrt, ScalarFunction::Inverse] {
            let fast = matrix_function_dense(&a, &f, true).unwrap();
            let slow = hermitian_function(&a.to_dense(), &f).unwrap();
            assert!(rel_diff(&fast, &slow) < 1e-13, "{f:?}");
        }
    }
}
