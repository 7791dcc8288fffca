//! Sparse symmetric matrices in CSR form and the normalized adjacency
//! operator used for spectral embeddings.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Square sparse matrix in compressed sparse row format.
///
/// Invariants (enforced by the constructors): `row_offsets` has `dim + 1`
/// monotonically non-decreasing entries starting at 0 and ending at `nnz`;
/// within each row, column indices are strictly increasing and `< dim`;
/// all stored values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a `dim x dim` matrix from (row, col, value) triplets.
    /// Duplicate coordinates are summed; explicit zeros are dropped.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::Data(format!(
                    "triplet ({r}, {c}) out of bounds for dim {dim}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("matrix entry at ({r}, {c})")));
            }
            entries.push((r, c, v));
        }
        entries.sort_unstable_by_key(|e| (e.0, e.1));

        let mut row_offsets = vec![0usize; dim + 1];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut i = 0;
        while i < entries.len() {
            let (r, c, mut v) = entries[i];
            i += 1;
            while i < entries.len() && entries[i].0 == r && entries[i].1 == c {
                v += entries[i].2;
                i += 1;
            }
            if v != 0.0 {
                row_offsets[r + 1] += 1;
                col_indices.push(c);
                values.push(v);
            }
        }
        for r in 0..dim {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(SparseMatrix {
            dim,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a matrix from raw CSR arrays, validating every invariant.
    pub fn from_csr(
        dim: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != dim + 1 {
            return Err(Error::Data(format!(
                "row_offsets has {} entries, expected {}",
                row_offsets.len(),
                dim + 1
            )));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::Data("row_offsets must span 0..=nnz".into()));
        }
        if col_indices.len() != values.len() {
            return Err(Error::Data("col_indices and values length mismatch".into()));
        }
        for r in 0..dim {
            let (lo, hi) = (row_offsets[r], row_offsets[r + 1]);
            if lo > hi {
                return Err(Error::Data(format!("row_offsets decreases at row {r}")));
            }
            for j in lo..hi {
                if col_indices[j] >= dim {
                    return Err(Error::Data(format!(
                        "column index {} out of bounds in row {r}",
                        col_indices[j]
                    )));
                }
                if j > lo && col_indices[j] <= col_indices[j - 1] {
                    return Err(Error::Data(format!(
                        "column indices not strictly increasing in row {r}"
                    )));
                }
                if !values[j].is_finite() {
                    return Err(Error::NonFinite(format!("matrix entry in row {r}")));
                }
            }
        }
        Ok(SparseMatrix {
            dim,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// y = A x.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::Data(format!(
                "spmv: vector length {} does not match dim {}",
                x.len(),
                self.dim
            )));
        }
        let mut y = vec![0.0; self.dim];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// y = A x without allocation. Lengths must already match `dim`.
    pub(crate) fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (r, yr) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
            let mut acc = 0.0;
            for j in lo..hi {
                acc += self.values[j] * x[self.col_indices[j]];
            }
            *yr = acc;
        }
    }

    /// Sum of each row's entries (weighted degree for an adjacency matrix).
    pub fn row_sums(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for (r, dr) in d.iter_mut().enumerate() {
            let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
            *dr = self.values[lo..hi].iter().sum();
        }
        d
    }

    /// Maximum absolute row sum (the induced infinity norm).
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|r| {
                let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
                self.values[lo..hi].iter().map(|v| v.abs()).sum()
            })
            .fold(0.0, f64::max)
    }

    /// True when every entry equals its transpose partner to within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        for r in 0..self.dim {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let vt = self.get(c, r);
                if (v - vt).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Entry (r, c), zero when not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(j) => vals[j],
            Err(_) => 0.0,
        }
    }

    /// Dense copy, for small oracles and tests.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.dim);
        for r in 0..self.dim {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                m.set(r, c, v);
            }
        }
        m
    }
}

/// Symmetrically normalized adjacency L = D^{-1/2} A D^{-1/2}, where D is
/// the diagonal of row sums of `a`.
///
/// Requires `a` symmetric with non-negative entries. Rows whose sum is zero
/// (isolated vertices) are left empty: the convention is d^{-1/2} = 0, so an
/// isolated vertex contributes nothing to the spectrum beyond the kernel.
/// For a connected non-empty graph the spectrum of L lies in [-1, 1] with
/// the top eigenvalue exactly 1.
pub fn normalized_laplacian(a: &SparseMatrix) -> Result<SparseMatrix> {
    if !a.is_symmetric(0.0) {
        return Err(Error::Data(
            "normalized_laplacian requires a symmetric matrix".into(),
        ));
    }
    if a.values.iter().any(|&v| v < 0.0) {
        return Err(Error::Data(
            "normalized_laplacian requires non-negative weights".into(),
        ));
    }
    let d = a.row_sums();
    let inv_sqrt: Vec<f64> = d
        .iter()
        .map(|&s| if s > 0.0 { 1.0 / s.sqrt() } else { 0.0 })
        .collect();
    let mut row_offsets = vec![0usize; a.dim + 1];
    let mut col_indices = Vec::with_capacity(a.nnz());
    let mut values = Vec::with_capacity(a.nnz());
    for r in 0..a.dim {
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            // Grouping the scale factors keeps L bit-exactly symmetric.
            let w = v * (inv_sqrt[r] * inv_sqrt[c]);
            if w != 0.0 {
                col_indices.push(c);
                values.push(w);
            }
        }
        row_offsets[r + 1] = values.len();
    }
    Ok(SparseMatrix {
        dim: a.dim,
        row_offsets,
        col_indices,
        values,
    })
}
