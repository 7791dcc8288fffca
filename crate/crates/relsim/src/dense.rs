//! Small dense symmetric matrices and a cyclic Jacobi eigensolver.
//!
//! The Jacobi solver is deliberately independent of the sparse iterative
//! path: it serves as the reference oracle the Lanczos solver is checked
//! against, and it also diagonalizes the small projected matrices that
//! arise inside the restarted iteration.

use crate::eigen::{canonicalize, EigenPairs};
use crate::error::{Error, Result};

/// Largest dimension the dense oracle accepts; beyond this the cubic cost
/// stops being "small".
pub const DENSE_ORACLE_MAX_DIM: usize = 512;

const MAX_JACOBI_SWEEPS: usize = 64;

/// Row-major square dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Data(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] = v;
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for r in 0..self.n {
            for c in (r + 1)..self.n {
                if (self.get(r, c) - self.get(c, r)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn off_diag_norm(&self) -> f64 {
        let mut s = 0.0;
        for r in 0..self.n {
            for c in 0..self.n {
                if r != c {
                    s += self.get(r, c) * self.get(r, c);
                }
            }
        }
        s.sqrt()
    }
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues and eigenvectors in canonical order: eigenvalues
/// descending, each eigenvector scaled so its largest-magnitude entry
/// (lowest index on ties) is positive. Accuracy is near machine precision:
/// the method applies exact orthogonal similarity transforms until the
/// off-diagonal mass is negligible.
pub fn jacobi_eigh(m: &DenseMatrix) -> Result<EigenPairs> {
    let n = m.n;
    if n == 0 {
        return Err(Error::Data("cannot decompose an empty matrix".into()));
    }
    if !m.is_symmetric(0.0) {
        return Err(Error::Data("jacobi_eigh requires a symmetric matrix".into()));
    }
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("jacobi_eigh input".into()));
    }

    let mut a = m.clone();
    let mut v = DenseMatrix::identity(n);
    let stop = 1e-15 * a.frob_norm().max(f64::MIN_POSITIVE);

    let mut converged = false;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        if a.off_diag_norm() <= stop {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= stop / (n as f64) {
                    continue;
                }
                // Classic rotation choice: the smaller-angle root, which
                // keeps the transform well conditioned.
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for i in 0..n {
                    let aip = a.get(i, p);
                    let aiq = a.get(i, q);
                    a.set(i, p, c * aip - s * aiq);
                    a.set(i, q, s * aip + c * aiq);
                }
                for i in 0..n {
                    let api = a.get(p, i);
                    let aqi = a.get(q, i);
                    a.set(p, i, c * api - s * aqi);
                    a.set(q, i, s * api + c * aqi);
                }
                // Kill round-off in the annihilated pair explicitly.
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for i in 0..n {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, c * vip - s * viq);
                    v.set(i, q, s * vip + c * viq);
                }
            }
        }
    }
    if !converged && a.off_diag_norm() > stop {
        return Err(Error::NoConvergence(format!(
            "jacobi_eigh: off-diagonal norm {:.3e} after {MAX_JACOBI_SWEEPS} sweeps",
            a.off_diag_norm()
        )));
    }

    let values: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let vectors: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| v.get(i, j)).collect())
        .collect();
    Ok(canonicalize(values, vectors))
}

/// Reference full-spectrum eigendecomposition for small symmetric matrices.
///
/// Intended for dimensions up to [`DENSE_ORACLE_MAX_DIM`]; larger inputs are
/// rejected rather than silently taking cubic time on a big matrix.
pub fn dense_eigen_oracle(m: &DenseMatrix) -> Result<EigenPairs> {
    if m.n > DENSE_ORACLE_MAX_DIM {
        return Err(Error::Data(format!(
            "dense oracle limited to dim <= {DENSE_ORACLE_MAX_DIM}, got {}",
            m.n
        )));
    }
    jacobi_eigh(m)
}
