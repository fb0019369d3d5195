//! Smallest eigenpairs of symmetric pencils `A x = gamma B x` with `A`
//! positive definite and `B` positive semidefinite.
//!
//! Solvers are interchangeable behind [`EigenSolver`] and looked up by name
//! in an [`EigenSolverRegistry`]. The default is a shift-invert Krylov
//! iteration on `A^{-1} B` in the `B`-semi-inner product, which never sees
//! the infinite eigenvalues carried by the null space of `B`.

mod dense;
mod factor;
mod lanczos;
mod subspace;

use std::collections::BTreeMap;

pub use dense::DenseReduction;
pub use factor::{factorize, LinearSolver, SparseCholesky};
pub use lanczos::ShiftInvertLanczos;
pub use subspace::SubspaceIteration;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_SEED: u64 = 0x5eed_e1a5;

/// Stiffness/mass pair produced by a discretization.
#[derive(Debug, Clone)]
pub struct SparsePencil {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub mu: f64,
    pub lambda: f64,
    /// Stabilizer exponent shift; `None` for methods without one.
    pub delta: Option<f64>,
}

impl SparsePencil {
    pub fn dim(&self) -> usize {
        self.a.dim()
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub gamma: f64,
    pub omega: f64,
    /// `B`-normalized eigenvector.
    pub vector: Vec<f64>,
    /// `||A u - gamma B u|| / ||A u||`.
    pub residual: f64,
}

impl EigenPair {
    pub fn new(a: &CsrMatrix, b: &CsrMatrix, mut vector: Vec<f64>) -> Self {
        let norm = b.bilinear(&vector, &vector).sqrt();
        vector.iter_mut().for_each(|x| *x /= norm);
        // deterministic sign: largest entry positive
        let pivot = vector.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            vector.iter_mut().for_each(|x| *x = -*x);
        }
        let au = a.mul_vec(&vector);
        let bu = b.mul_vec(&vector);
        let gamma = dot(&vector, &au);
        let res: f64 = au.iter().zip(&bu).map(|(x, y)| (x - gamma * y).powi(2)).sum::<f64>().sqrt();
        let residual = res / norm2(&au).max(f64::MIN_POSITIVE);
        Self { gamma, omega: gamma.max(0.0).sqrt(), vector, residual }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Relative tolerance on the shift-inverted residual `||A^{-1}Bu - theta u||_B / theta`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, seed: DEFAULT_SEED }
    }
}

pub trait EigenSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// The `m` smallest finite eigenpairs in ascending order.
    fn smallest(&self, a: &CsrMatrix, b: &CsrMatrix, m: usize, opts: &SolveOptions) -> Result<Vec<EigenPair>>;
}

/// Name -> solver lookup.
pub struct EigenSolverRegistry {
    entries: BTreeMap<&'static str, Box<dyn EigenSolver>>,
}

impl EigenSolverRegistry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(ShiftInvertLanczos::default()));
        r.register(Box::new(SubspaceIteration::default()));
        r.register(Box::new(DenseReduction::default()));
        r
    }

    pub fn register(&mut self, solver: Box<dyn EigenSolver>) {
        self.entries.insert(solver.name(), solver);
    }

    pub fn get(&self, name: &str) -> Result<&dyn EigenSolver> {
        self.entries.get(name).map(|b| b.as_ref()).ok_or_else(|| {
            Error::invalid(format!("unknown eigensolver `{name}` (known: {})", self.names().join(", ")))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

/// Smallest eigenpairs with the default solver.
pub fn smallest_eigenpairs(a: &CsrMatrix, b: &CsrMatrix, m: usize, tol: f64) -> Result<Vec<EigenPair>> {
    ShiftInvertLanczos::default().smallest(a, b, m, &SolveOptions { tol, ..Default::default() })
}

/// `u^T A u / u^T B u`.
pub fn rayleigh_quotient(a: &CsrMatrix, b: &CsrMatrix, u: &[f64]) -> Result<f64> {
    let den = b.bilinear(u, u);
    if den <= 0.0 {
        return Err(Error::invalid("vector has no component in the range of B"));
    }
    Ok(a.bilinear(u, u) / den)
}

/// Number of finite eigenvalues, taken as the count of nonzero diagonal
/// entries of `B`. Exact for diagonal and for definite `B`.
pub fn finite_eigenvalue_count(b: &CsrMatrix) -> usize {
    b.diag().iter().filter(|&&d| d != 0.0).count()
}

/// Pairs each coarse eigenvalue with the closest unused fine eigenvalue.
/// Ties within `1e-12` relative go to the fine vector with the larger
/// `|<coarse, fine>_B|` supplied by `angle`.
pub fn match_pairs(coarse: &[f64], fine: &[f64], angle: impl Fn(usize, usize) -> f64) -> Vec<Option<usize>> {
    let mut used = vec![false; fine.len()];
    coarse
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let mut best: Option<(usize, f64)> = None;
            for (j, &f) in fine.iter().enumerate() {
                if used[j] {
                    continue;
                }
                let d = (g - f).abs();
                best = match best {
                    None => Some((j, d)),
                    Some((bj, bd)) => {
                        let tie = (d - bd).abs() <= 1e-12 * g.abs().max(1.0);
                        if (tie && angle(i, j) > angle(i, bj)) || (!tie && d < bd) {
                            Some((j, d))
                        } else {
                            Some((bj, bd))
                        }
                    }
                };
            }
            best.map(|(j, _)| {
                used[j] = true;
                j
            })
        })
        .collect()
}

pub(crate) fn check_inputs(a: &CsrMatrix, b: &CsrMatrix, m: usize) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::invalid("A and B differ in size"));
    }
    if m == 0 {
        return Err(Error::invalid("at least one eigenpair must be requested"));
    }
    let finite = finite_eigenvalue_count(b);
    if finite == 0 {
        return Err(Error::invalid("B is zero"));
    }
    if m > finite {
        return Err(Error::invalid(format!("{m} eigenpairs requested but the pencil has only {finite} finite eigenvalues")));
    }
    Ok(finite)
}

/// Stopping rule shared by the iterative solvers. `shift_inverted` is the
/// largest `||A^{-1}Bu - theta u||_B / theta` over the wanted pairs. The
/// residual `||Au - gamma Bu|| / ||Au||` has a rounding floor that grows
/// with the condition of `A` (nearly incompressible materials push it to
/// about `1e-8`), so once the shift-inverted residual is three orders below
/// `tol` the pairs are accepted regardless.
pub(crate) fn accept(shift_inverted: f64, pairs: &[EigenPair], tol: f64) -> bool {
    let spec = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
    shift_inverted <= tol && (spec <= tol || shift_inverted <= 1e-3 * tol)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}
