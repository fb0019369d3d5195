use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{accept, axpy, check_inputs, dot, factorize, EigenPair, EigenSolver, LinearSolver, SolveOptions};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Block inverse iteration with Rayleigh-Ritz. With `guard = 0` and one
/// requested pair this is plain inverse iteration.
#[derive(Debug, Clone)]
pub struct SubspaceIteration {
    /// Extra block vectors beyond the requested count.
    pub guard: usize,
    pub max_iterations: usize,
}

impl Default for SubspaceIteration {
    fn default() -> Self {
        Self { guard: 6, max_iterations: 2000 }
    }
}

impl SubspaceIteration {
    pub fn plain() -> Self {
        Self { guard: 0, max_iterations: 20_000 }
    }
}

impl EigenSolver for SubspaceIteration {
    fn name(&self) -> &'static str {
        "subspace"
    }

    fn smallest(&self, a: &CsrMatrix, b: &CsrMatrix, m: usize, opts: &SolveOptions) -> Result<Vec<EigenPair>> {
        let finite = check_inputs(a, b, m)?;
        let chol = factorize(a)?;
        let p = (m + self.guard).min(finite);
        let n = a.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let start: Vec<Vec<f64>> = (0..p)
            .map(|_| {
                let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                b.mul_vec(&r)
            })
            .collect();
        let mut x = chol.solve_many(&start);
        let mut worst = f64::INFINITY;

        for _ in 0..self.max_iterations {
            b_orthonormalize(&mut x, b)?;
            let bx: Vec<Vec<f64>> = x.iter().map(|v| b.mul_vec(v)).collect();
            let tx = chol.solve_many(&bx);
            let h = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&bx[i], &tx[j]) + dot(&bx[j], &tx[i])));
            let eig = SymmetricEigen::new(h);
            let mut order: Vec<usize> = (0..p).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

            let mut ritz_x = Vec::with_capacity(p);
            let mut ritz_t = Vec::with_capacity(p);
            worst = 0.0;
            for (rank, &c) in order.iter().enumerate() {
                let theta = eig.eigenvalues[c];
                let mut y = vec![0.0; n];
                let mut ty = vec![0.0; n];
                for k in 0..p {
                    let s = eig.eigenvectors[(k, c)];
                    axpy(s, &x[k], &mut y);
                    axpy(s, &tx[k], &mut ty);
                }
                if rank < m {
                    let mut d = ty.clone();
                    axpy(-theta, &y, &mut d);
                    worst = worst.max(b.bilinear(&d, &d).max(0.0).sqrt() / theta.abs().max(f64::MIN_POSITIVE));
                }
                ritz_x.push(y);
                ritz_t.push(ty);
            }
            if worst <= opts.tol {
                let mut pairs: Vec<EigenPair> = ritz_x.iter().take(m).map(|v| EigenPair::new(a, b, v.clone())).collect();
                if accept(worst, &pairs, opts.tol) {
                    pairs.sort_by(|p, q| p.gamma.total_cmp(&q.gamma));
                    return Ok(pairs);
                }
            }
            x = ritz_t;
        }
        Err(Error::Convergence { iterations: self.max_iterations * p, residual: worst })
    }
}

fn b_orthonormalize(x: &mut [Vec<f64>], b: &CsrMatrix) -> Result<()> {
    for i in 0..x.len() {
        for _ in 0..2 {
            for j in 0..i {
                let bj = b.mul_vec(&x[j]);
                let c = dot(&bj, &x[i]);
                let (head, tail) = x.split_at_mut(i);
                axpy(-c, &head[j], &mut tail[0]);
            }
        }
        let norm = b.bilinear(&x[i], &x[i]).max(0.0).sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("iteration block lost rank"));
        }
        x[i].iter_mut().for_each(|c| *c /= norm);
    }
    Ok(())
}
