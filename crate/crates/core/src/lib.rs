//! Probing methods for matrix functions.
//!
//! Given a sparse matrix `A` and a scalar function `f`, this crate estimates
//! `tr(f(A))` and builds sparse approximations of `f(A)` from a handful of
//! products `f(A)v` / quadratic forms `vᴴf(A)v`, where the probing vectors `v`
//! are indicator vectors of the color classes of a distance-`d` graph coloring
//! of the sparsity pattern. The products are evaluated with Arnoldi/Lanczos,
//! and a-priori error bounds follow from exponential off-diagonal decay models.
//!
//! Module map:
//!
//! - [`sparse`], [`dense`], [`mtx`]: CSR storage over complex scalars, small
//!   dense matrix functions, Matrix Market I/O.
//! - [`graph`]: pattern graphs, BFS distances, level sets, distance truncation,
//!   reverse Cuthill–McKee.
//! - [`coloring`]: greedy, banded and lattice distance-`d` colorings plus the
//!   lattice point counts they rely on.
//! - [`krylov`]: Arnoldi decompositions, `f(A)b` and `vᴴf(A)v` approximations,
//!   step-count rules.
//! - [`probing`]: probing vectors, trace estimator, sparse approximator.
//! - [`bounds`]: decay models, error bounds, negative-order polylogarithms.
//! - [`harness`]: matrix generators, dense reference oracles, experiment sweeps.

pub mod bounds;
pub mod coloring;
pub mod dense;
pub mod error;
pub mod graph;
pub mod harness;
pub mod krylov;
pub mod mtx;
pub mod probing;
pub mod sparse;

pub use error::{Error, Result};
pub use num_complex::Complex64 as Scalar;

/// Dense complex matrix, used for small Hessenberg factors and desk-scale oracles.
pub type DenseMatrix = nalgebra::DMatrix<Scalar>;
