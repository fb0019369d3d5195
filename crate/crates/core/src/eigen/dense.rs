use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{check_inputs, EigenPair, EigenSolver, SolveOptions};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Dense reference solver. Restricts the pencil to the range of `B` by a
/// Schur complement over its null space, then solves a standard symmetric
/// problem. Only meant for small systems.
#[derive(Debug, Clone)]
pub struct DenseReduction {
    pub max_dim: usize,
}

impl Default for DenseReduction {
    fn default() -> Self {
        Self { max_dim: 3000 }
    }
}

impl EigenSolver for DenseReduction {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn smallest(&self, a: &CsrMatrix, b: &CsrMatrix, m: usize, _opts: &SolveOptions) -> Result<Vec<EigenPair>> {
        check_inputs(a, b, m)?;
        let n = a.dim();
        if n > self.max_dim {
            return Err(Error::invalid(format!("dense solver limited to {} unknowns, got {n}", self.max_dim)));
        }
        let ad = a.to_dense();
        let bd = b.to_dense();
        let eb = SymmetricEigen::new(bd.clone());
        let bmax = eb.eigenvalues.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let cut = bmax * 1e-12 * n as f64;
        let range: Vec<usize> = (0..n).filter(|&i| eb.eigenvalues[i] > cut).collect();
        let null: Vec<usize> = (0..n).filter(|&i| eb.eigenvalues[i] <= cut).collect();
        if range.len() < m {
            return Err(Error::invalid(format!("{m} eigenpairs requested but B has rank {}", range.len())));
        }
        let qr = eb.eigenvectors.select_columns(&range);
        let qn = eb.eigenvectors.select_columns(&null);

        let a_rr = qr.transpose() * &ad * &qr;
        // x = Qr y + Qn z with z = -A_nn^{-1} A_nr y
        let (schur, lift) = if null.is_empty() {
            (a_rr, DMatrix::zeros(0, range.len()))
        } else {
            let a_nr = qn.transpose() * &ad * &qr;
            let a_nn = qn.transpose() * &ad * &qn;
            let chol = a_nn.cholesky().ok_or(Error::NotPositiveDefinite)?;
            let lift = -chol.solve(&a_nr);
            (a_rr + a_nr.transpose() * &lift, lift)
        };
        let scale = DVector::from_iterator(range.len(), range.iter().map(|&i| 1.0 / eb.eigenvalues[i].sqrt()));
        let mut c = schur;
        for i in 0..c.nrows() {
            for j in 0..c.ncols() {
                c[(i, j)] *= scale[i] * scale[j];
            }
        }
        let c = (&c + c.transpose()) * 0.5;
        let ec = SymmetricEigen::new(c);
        let mut order: Vec<usize> = (0..ec.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| ec.eigenvalues[i].total_cmp(&ec.eigenvalues[j]));

        let pairs = order
            .into_iter()
            .take(m)
            .map(|k| {
                let y = ec.eigenvectors.column(k).component_mul(&scale);
                let mut x = &qr * &y;
                if !null.is_empty() {
                    x += &qn * (&lift * &y);
                }
                EigenPair::new(a, b, x.iter().copied().collect())
            })
            .collect();
        Ok(pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupled_null_space() {
        // A = [[2,1],[1,2]], B = diag(1,0): finite eigenvalue is the Schur complement 2 - 1/2
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        let b = CsrMatrix::diagonal(&[1.0, 0.0]);
        let p = DenseReduction::default().smallest(&a, &b, 1, &SolveOptions::default()).unwrap();
        assert!((p[0].gamma - 1.5).abs() < 1e-13);
        assert!(p[0].residual < 1e-13);
    }
}
