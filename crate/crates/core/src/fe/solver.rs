//! Sparse direct solve through faer's LU with partial pivoting.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseRowMat, SymbolicSparseRowMat};
use faer::Mat;

use crate::error::{Error, Result};
use crate::fe::assembly::CsrMatrix;

/// Largest accepted `||A x - b|| / ||b||`.
pub const RESIDUAL_TOL: f64 = 1e-9;

pub struct LuSolver {
    lu: Lu<usize, f64>,
    matrix: CsrMatrix,
}

impl std::fmt::Debug for LuSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuSolver").field("n", &self.matrix.nrows).field("nnz", &self.matrix.nnz()).finish()
    }
}

impl LuSolver {
    pub fn factorize(a: &CsrMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Solver(format!("matrix is {}x{}", a.nrows, a.ncols)));
        }
        if a.nrows == 0 {
            return Err(Error::Solver("empty system".into()));
        }
        let sym = SymbolicSparseRowMat::new_checked(a.nrows, a.ncols, a.row_ptr.clone(), None, a.col_idx.clone());
        let m = SparseRowMat::new(sym, a.values.clone());
        let lu = m.sp_lu().map_err(|e| Error::Solver(format!("LU factorization failed: {e:?}")))?;
        Ok(Self { lu, matrix: a.clone() })
    }

    /// Solves and returns the solution with its relative residual.
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, f64)> {
        let n = self.matrix.nrows;
        if b.len() != n {
            return Err(Error::Solver(format!("rhs of length {} for a {n}x{n} system", b.len())));
        }
        let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
        let sol = self.lu.solve(&rhs);
        let x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("non-finite solution (singular matrix?)".into()));
        }
        let ax = self.matrix.matvec(&x);
        let rn: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = if bn > 0.0 { rn / bn } else { rn };
        if !(rel <= RESIDUAL_TOL) {
            return Err(Error::Solver(format!("relative residual {rel:.3e} exceeds {RESIDUAL_TOL:.0e}")));
        }
        Ok((x, rel))
    }
}
