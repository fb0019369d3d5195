use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{accept, axpy, check_inputs, dot, factorize, EigenPair, EigenSolver, LinearSolver, SolveOptions};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Thick-restart Lanczos on `T = A^{-1} B`, `B`-orthonormal basis with full
/// reorthogonalization. The projected matrix is formed explicitly from the
/// stored images `T v_j`, so restarts need no extra solves.
#[derive(Debug, Clone)]
pub struct ShiftInvertLanczos {
    /// Basis size before a restart; `None` picks `max(2m + 20, 40)`.
    pub max_basis: Option<usize>,
    /// Operator applications allowed per requested eigenpair.
    pub budget_per_pair: usize,
}

impl Default for ShiftInvertLanczos {
    fn default() -> Self {
        Self { max_basis: None, budget_per_pair: 300 }
    }
}

struct Basis {
    v: Vec<Vec<f64>>,
    bv: Vec<Vec<f64>>,
    tv: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
}

impl Basis {
    fn len(&self) -> usize {
        self.v.len()
    }

    /// Removes the span of the basis from `x` (two passes), returns `||x||_B`.
    fn orthogonalize(&self, x: &mut [f64], b: &CsrMatrix) -> f64 {
        for _ in 0..2 {
            for (v, bv) in self.v.iter().zip(&self.bv) {
                let c = dot(bv, x);
                axpy(-c, v, x);
            }
        }
        b.bilinear(x, x).max(0.0).sqrt()
    }

    fn combine(vectors: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; vectors[0].len()];
        for (v, &c) in vectors.iter().zip(coeffs) {
            axpy(c, v, &mut out);
        }
        out
    }
}

impl EigenSolver for ShiftInvertLanczos {
    fn name(&self) -> &'static str {
        "lanczos"
    }

    fn smallest(&self, a: &CsrMatrix, b: &CsrMatrix, m: usize, opts: &SolveOptions) -> Result<Vec<EigenPair>> {
        let finite = check_inputs(a, b, m)?;
        let chol = factorize(a)?;
        let max_basis = self.max_basis.unwrap_or((2 * m + 20).max(40)).max(m + 2).min(finite);
        let keep = (m + (max_basis - m) / 2).min(max_basis.saturating_sub(1)).max(m.min(max_basis));
        let budget = self.budget_per_pair * m;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut ops = 0usize;

        let mut basis = Basis { v: Vec::new(), bv: Vec::new(), tv: Vec::new(), h: Vec::new() };

        let mut fresh = |basis: &Basis, ops: &mut usize| -> Option<Vec<f64>> {
            for _ in 0..3 {
                let r: Vec<f64> = (0..a.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut x = chol.solve(&b.mul_vec(&r));
                *ops += 1;
                let before = b.bilinear(&x, &x).max(0.0).sqrt();
                if before == 0.0 {
                    continue;
                }
                let after = basis.orthogonalize(&mut x, b);
                if after > 1e-8 * before {
                    x.iter_mut().for_each(|c| *c /= after);
                    return Some(x);
                }
            }
            None
        };

        let mut pending = fresh(&basis, &mut ops).ok_or_else(|| Error::invalid("B annihilates the range of A^{-1}"))?;
        let mut worst = f64::INFINITY;
        loop {
            let v = pending;
            let bv = b.mul_vec(&v);
            let tv = chol.solve(&bv);
            ops += 1;
            let j = basis.len();
            let col: Vec<f64> = basis.bv.iter().chain(std::iter::once(&bv)).map(|x| dot(x, &tv)).collect();
            for (i, row) in basis.h.iter_mut().enumerate() {
                row.push(col[i]);
            }
            basis.h.push(col.clone());
            basis.v.push(v);
            basis.bv.push(bv);
            basis.tv.push(tv.clone());

            let mut r = tv;
            let beta = basis.orthogonalize(&mut r, b);
            let scale = col[j].abs().max(f64::MIN_POSITIVE);
            let mut exhausted = basis.len() >= finite;
            let next = if !exhausted && beta > 1e-12 * scale {
                r.iter_mut().for_each(|c| *c /= beta);
                Some(r)
            } else if !exhausted {
                fresh(&basis, &mut ops)
            } else {
                None
            };
            exhausted |= next.is_none();

            let n = basis.len();
            if exhausted && n < m {
                return Err(Error::invalid(format!("only {n} finite eigenvalues are reachable, {m} requested")));
            }
            let check = n >= m && (n.is_multiple_of(5) || n == max_basis || exhausted);
            if check {
                let hm = DMatrix::from_fn(n, n, |i, k| 0.5 * (basis.h[i][k] + basis.h[k][i]));
                let eig = SymmetricEigen::new(hm);
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
                let ritz: Vec<(f64, Vec<f64>)> = order
                    .iter()
                    .map(|&c| (eig.eigenvalues[c], eig.eigenvectors.column(c).iter().copied().collect()))
                    .collect();

                worst = 0.0;
                for (theta, s) in ritz.iter().take(m) {
                    let y = Basis::combine(&basis.v, s);
                    let mut d = Basis::combine(&basis.tv, s);
                    axpy(-theta, &y, &mut d);
                    let res = b.bilinear(&d, &d).max(0.0).sqrt() / theta.abs().max(f64::MIN_POSITIVE);
                    worst = worst.max(res);
                }

                if worst <= opts.tol || exhausted {
                    let mut pairs: Vec<EigenPair> = ritz
                        .iter()
                        .take(m)
                        .map(|(_, s)| EigenPair::new(a, b, Basis::combine(&basis.v, s)))
                        .collect();
                    if exhausted || accept(worst, &pairs, opts.tol) {
                        pairs.sort_by(|p, q| p.gamma.total_cmp(&q.gamma));
                        return Ok(pairs);
                    }
                }

                if n >= max_basis {
                    let kept: Vec<&Vec<f64>> = ritz.iter().take(keep).map(|(_, s)| s).collect();
                    let restart = |src: &[Vec<f64>]| -> Vec<Vec<f64>> { kept.iter().map(|s| Basis::combine(src, s)).collect() };
                    let v = restart(&basis.v);
                    let bv = restart(&basis.bv);
                    let tv = restart(&basis.tv);
                    let h = (0..kept.len())
                        .map(|i| (0..kept.len()).map(|k| if i == k { ritz[i].0 } else { 0.0 }).collect())
                        .collect();
                    basis = Basis { v, bv, tv, h };
                }
            }

            if ops >= budget {
                return Err(Error::Convergence { iterations: ops, residual: worst });
            }
            pending = next.expect("basis not exhausted");
        }
    }
}
