use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::LltError;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Conj, Mat, Side};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Something that applies `A^{-1}`.
pub trait LinearSolver: Send + Sync {
    fn dim(&self) -> usize;

    /// Solves for several right-hand sides at once.
    fn solve_many(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>>;

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.solve_many(std::slice::from_ref(&rhs.to_vec())).pop().unwrap()
    }
}

/// Sparse `LL^T` factorization (fill-reducing ordering chosen by the backend).
pub struct SparseCholesky {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl std::fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseCholesky").field("n", &self.n).finish()
    }
}

impl SparseCholesky {
    /// Factorizes a symmetric matrix; only its lower triangle is read.
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        if n == 0 {
            return Err(Error::invalid("cannot factorize an empty matrix"));
        }
        // CSR of a symmetric matrix is its own CSC.
        let symbolic = SymbolicSparseColMat::<usize>::new_checked(
            n,
            n,
            a.row_ptr().to_vec(),
            None,
            a.col_indices().to_vec(),
        );
        let mat = SparseColMat::<usize, f64>::new(symbolic, a.values().to_vec());
        let llt = mat.sp_cholesky(Side::Lower).map_err(|e| match e {
            LltError::Numeric(_) => Error::NotPositiveDefinite,
            LltError::Generic(g) => Error::Backend(format!("{g:?}")),
        })?;
        Ok(Self { n, llt })
    }
}

impl LinearSolver for SparseCholesky {
    fn dim(&self) -> usize {
        self.n
    }

    fn solve_many(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if rhs.is_empty() {
            return Vec::new();
        }
        let mut x = Mat::<f64>::from_fn(self.n, rhs.len(), |i, j| rhs[j][i]);
        self.llt.solve_in_place_with_conj(Conj::No, x.as_mut());
        (0..rhs.len()).map(|j| (0..self.n).map(|i| x[(i, j)]).collect()).collect()
    }
}

/// Factorizes a symmetric positive-definite matrix.
pub fn factorize(a: &CsrMatrix) -> Result<SparseCholesky> {
    SparseCholesky::new(a)
}
