//! Compressed sparse row storage over complex scalars.

use crate::{DenseMatrix, Error, Result, Scalar};

/// CSR matrix. Rows are sorted, column indices strictly increase within a
/// row, and there are no duplicate entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Scalar>,
}

impl SparseMatrix {
    /// Assembles a matrix from `(row, col, value)` triplets (0-based).
    ///
    /// Duplicates are summed and entries that end up exactly zero are
    /// dropped, so the stored pattern is the nonzero pattern.
    pub fn from_triplets<I>(n_rows: usize, n_cols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, Scalar)>,
    {
        let mut entries: Vec<(usize, usize, Scalar)> = entries.into_iter().collect();
        for &(i, j, _) in &entries {
            if i >= n_rows || j >= n_cols {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) outside a {n_rows}x{n_cols} matrix")));
            }
        }
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));

        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        let mut iter = entries.into_iter().peekable();
        while let Some((i, j, mut v)) = iter.next() {
            while let Some(&(i2, j2, v2)) = iter.peek() {
                if i2 == i && j2 == j {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != Scalar::new(0.0, 0.0) {
                rows.push(i);
                col_idx.push(j);
                values.push(v);
            }
        }
        for &i in &rows {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, values })
    }

    /// Wraps raw CSR arrays after checking every structural invariant.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<Scalar>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1 || row_ptr[0] != 0 {
            return Err(Error::InvalidArgument("row_ptr must have n_rows + 1 entries starting at 0".into()));
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("row_ptr must be non-decreasing".into()));
        }
        let nnz = row_ptr[n_rows];
        if col_idx.len() != nnz || values.len() != nnz {
            return Err(Error::InvalidArgument("col_idx/values length differs from row_ptr[n_rows]".into()));
        }
        for i in 0..n_rows {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!("row {i}: columns not strictly increasing")));
            }
            if cols.last().is_some_and(|&c| c >= n_cols) {
                return Err(Error::InvalidArgument(format!("row {i}: column index out of bounds")));
            }
        }
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, values })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, row_ptr: vec![0; n_rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![Scalar::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(diag: &[Scalar]) -> Self {
        let n = diag.len();
        Self::from_triplets(n, n, diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
            .expect("diagonal entries are in bounds")
    }

    /// Sparse copy of a dense matrix keeping entries with `|a_ij| > drop_tol`.
    pub fn from_dense(a: &DenseMatrix, drop_tol: f64) -> Self {
        let entries = (0..a.nrows()).flat_map(|i| (0..a.ncols()).map(move |j| (i, j))).filter_map(|(i, j)| {
            let v = a[(i, j)];
            (v.norm() > drop_tol).then_some((i, j, v))
        });
        Self::from_triplets(a.nrows(), a.ncols(), entries).expect("dense indices are in bounds")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[Scalar] {
        &self.values
    }

    /// Stored `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Scalar)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Scalar)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> Scalar {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => Scalar::new(0.0, 0.0),
        }
    }

    pub fn diagonal(&self) -> Vec<Scalar> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    /// `A·x`.
    pub fn matvec(&self, x: &[Scalar]) -> Result<Vec<Scalar>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch(format!(
                "matvec: vector has length {}, matrix has {} columns",
                x.len(),
                self.n_cols
            )));
        }
        let mut y = vec![Scalar::new(0.0, 0.0); self.n_rows];
        self.apply(x, &mut y);
        Ok(y)
    }

    /// `y = A·x` without dimension checks.
    pub(crate) fn apply(&self, x: &[Scalar], y: &mut [Scalar]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = Scalar::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.n_cols, self.n_rows, self.triplets().map(|(i, j, v)| (j, i, v.conj())))
            .expect("transposed indices are in bounds")
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// Symmetric permutation `B = P A Pᵀ` with `B[k][l] = A[order[k]][order[l]]`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        if !self.is_square() || order.len() != self.n_rows {
            return Err(Error::DimensionMismatch("permute needs a square matrix and a full order".into()));
        }
        let mut position = vec![usize::MAX; order.len()];
        for (k, &old) in order.iter().enumerate() {
            if old >= order.len() || position[old] != usize::MAX {
                return Err(Error::InvalidArgument("order is not a permutation".into()));
            }
            position[old] = k;
        }
        Self::from_triplets(self.n_rows, self.n_cols, self.triplets().map(|(i, j, v)| (position[i], position[j], v)))
    }

    /// Largest `|i - j|` over stored entries.
    pub fn semi_bandwidth(&self) -> usize {
        self.triplets().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// Entrywise check `|a_ij - conj(a_ji)| <= tol * max|a|`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        self.triplets().all(|(i, j, v)| (v - self.get(j, i).conj()).norm() <= tol * scale)
    }
}
