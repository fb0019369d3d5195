//! Two-grid correction of WG eigenpairs.
//!
//! An eigenpair `(gamma_H, u_H)` is computed on a coarse mesh. On a mesh
//! refined `r` times one linear solve `a_w(u, v) = gamma_H b_w(u_H, v)`
//! follows, and the Rayleigh quotient of `u` is the corrected eigenvalue.
//! `u_H` restricted to a fine triangle is still a polynomial of degree `k`,
//! so the coarse-to-fine transfer is exact.

use crate::eigen::{EigenPair, EigenSolver, LinearSolver, SolveOptions};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::wg::{assemble_pencil, energy, interior_load, mass, CondensedSolver, WgFunction, WgParams, WgSpace};

/// A coarse WG function evaluated on a nested fine mesh.
#[derive(Debug, Clone)]
pub struct TransferredField<'a> {
    coarse: &'a WgFunction<'a>,
    ancestor: &'a [usize],
}

impl TransferredField<'_> {
    /// Value of `u_{H,0}` at physical point `x` of fine triangle `t`.
    pub fn eval(&self, t: usize, x: Point) -> [f64; 2] {
        self.coarse.eval_interior(self.ancestor[t], x).expect("coarse triangles are valid")
    }
}

/// Makes the interior part of `u_coarse` evaluable on `fine`, whose parent
/// map must point into the coarse mesh (see [`crate::mesh::Mesh::refine_nested`]).
pub fn transfer_coarse_to_fine<'a>(u_coarse: &'a WgFunction<'a>, fine: &'a WgSpace) -> Result<TransferredField<'a>> {
    let ancestor = fine.mesh().parent().ok_or_else(|| Error::invalid("fine mesh carries no parent map"))?;
    let nc = u_coarse.space().mesh().num_triangles();
    if ancestor.len() != fine.mesh().num_triangles() || ancestor.iter().any(|&p| p >= nc) {
        return Err(Error::invalid("fine mesh parent map does not point into the coarse mesh"));
    }
    Ok(TransferredField { coarse: u_coarse, ancestor })
}

/// One corrected eigenpair.
#[derive(Debug, Clone)]
pub struct TwoGridResult {
    /// Zero-based index of the eigenpair.
    pub j: usize,
    pub coarse: EigenPair,
    /// Fine coefficients, `b_w`-normalized.
    pub fine: Vec<f64>,
    /// Rayleigh quotient of the fine function.
    pub gamma: f64,
    pub omega: f64,
    /// Largest triangle diameter of the coarse and the fine mesh.
    pub coarse_diameter: f64,
    pub fine_diameter: f64,
    /// Grid cell sizes of the coarse and the fine mesh.
    pub coarse_cell: f64,
    pub fine_cell: f64,
    pub refinements: usize,
}

/// Result of a two-grid run for the first `m` eigenpairs.
#[derive(Debug)]
pub struct TwoGridRun {
    pub fine_space: WgSpace,
    pub results: Vec<TwoGridResult>,
}

/// Smallest `m` eigenpairs of the WG pencil on `space`.
pub fn wg_eigenpairs(
    space: &WgSpace,
    params: &WgParams,
    m: usize,
    solver: &dyn EigenSolver,
    opts: &SolveOptions,
) -> Result<Vec<EigenPair>> {
    let pencil = assemble_pencil(space, params)?;
    solver.smallest(&pencil.a, &pencil.b, m, opts)
}

/// Runs the two-grid scheme with `refinements` uniform refinements between
/// the coarse and the fine mesh. `refinements = 0` reuses the coarse mesh
/// and is only meaningful as a consistency check.
pub fn two_grid_eigen(
    coarse: &WgSpace,
    refinements: usize,
    params: &WgParams,
    m: usize,
    solver: &dyn EigenSolver,
    opts: &SolveOptions,
) -> Result<TwoGridRun> {
    let pairs = wg_eigenpairs(coarse, params, m, solver, opts)?;
    let fine_space = WgSpace::new(coarse.mesh().refine_nested(refinements), coarse.degree())?;
    let results = correct(coarse, &fine_space, params, &pairs, refinements)?;
    Ok(TwoGridRun { fine_space, results })
}

/// Steps two and three for already computed coarse pairs.
pub fn correct(
    coarse: &WgSpace,
    fine: &WgSpace,
    params: &WgParams,
    pairs: &[EigenPair],
    refinements: usize,
) -> Result<Vec<TwoGridResult>> {
    let loads = pairs
        .iter()
        .map(|p| {
            let u = WgFunction::from_coeffs(coarse, p.vector.clone())?;
            let field = transfer_coarse_to_fine(&u, fine)?;
            let mut load = interior_load(fine, |t, x| field.eval(t, x))?;
            load.iter_mut().for_each(|x| *x *= p.gamma);
            Ok(load)
        })
        .collect::<Result<Vec<_>>>()?;
    let solver = CondensedSolver::new(fine, params)?;
    let solutions = solver.solve_many(&loads);
    drop(solver);

    pairs
        .iter()
        .zip(solutions)
        .enumerate()
        .map(|(j, (p, mut u))| {
            let num = energy(fine, params, &u)?;
            let den = mass(fine, &u)?;
            if den <= 0.0 {
                return Err(Error::invalid("fine solution has no interior component"));
            }
            let scale = 1.0 / den.sqrt();
            u.iter_mut().for_each(|x| *x *= scale);
            let gamma = num / den;
            Ok(TwoGridResult {
                j,
                coarse: p.clone(),
                fine: u,
                gamma,
                omega: gamma.max(0.0).sqrt(),
                coarse_diameter: coarse.mesh().h(),
                fine_diameter: fine.mesh().h(),
                coarse_cell: coarse.mesh().cell_size(),
                fine_cell: fine.mesh().cell_size(),
                refinements,
            })
        })
        .collect()
}

/// Whether `H^(2 kbar) <= h^(2k + delta0)` with `kbar = min(2k - 2 delta, k + 2 - 2 delta)`,
/// the mesh coupling under which the corrected values are lower bounds.
pub fn check_lower_bound_pairing(k: usize, delta: f64, delta0: f64, coarse_h: f64, fine_h: f64) -> bool {
    let k = k as f64;
    let kbar = (2.0 * k - 2.0 * delta).min(k + 2.0 - 2.0 * delta);
    coarse_h.powf(2.0 * kbar) <= fine_h.powf(2.0 * k + delta0)
}
