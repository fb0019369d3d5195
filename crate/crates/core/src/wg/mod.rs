//! Weak Galerkin discretization of the elasticity eigenproblem.
//!
//! Unknowns are pairs `{v0, vb}`: vector `P_k` polynomials inside each
//! triangle and vector `P_k` polynomials on each edge, with `vb = 0` on the
//! clamped part of the boundary. Global numbering puts all interior dofs
//! first (triangle by triangle), then the dofs of the free edges, so the
//! mass matrix is diagonal with zeros on the edge block.

mod condense;
mod local;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use condense::CondensedSolver;
pub use local::WeakOperators;

use crate::basis::{edge_quadrature, triangle_quadrature};
use crate::eigen::{LinearSolver, SparsePencil};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::sparse::{CsrMatrix, PatternAssembler};
use local::{ElementGeometry, RefTables};

/// Elements handled per parallel batch. Fixed so that merges happen in the
/// same order whatever the thread count.
pub(crate) const CHUNK: usize = 1024;

/// `(lambda, mu)` from Young's modulus and Poisson ratio.
pub fn lame_parameters(young: f64, nu: f64) -> Result<(f64, f64)> {
    if !(young > 0.0 && young.is_finite()) {
        return Err(Error::invalid(format!("Young's modulus must be positive, got {young}")));
    }
    if !(nu > 0.0 && nu < 0.5) {
        return Err(Error::invalid(format!("Poisson ratio must lie in (0, 0.5), got {nu}")));
    }
    let lambda = young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = young / (2.0 * (1.0 + nu));
    Ok((lambda, mu))
}

/// Coefficients of the WG bilinear form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WgParams {
    pub mu: f64,
    pub lambda: f64,
    /// Stabilizer weight is `h_T^(-1 + delta)`.
    pub delta: f64,
}

impl WgParams {
    pub fn from_material(young: f64, nu: f64, delta: f64) -> Result<Self> {
        let (lambda, mu) = lame_parameters(young, nu)?;
        let p = Self { mu, lambda, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.mu > 0.0 && self.lambda > 0.0 && self.mu.is_finite() && self.lambda.is_finite()) {
            return Err(Error::invalid("Lame parameters must be positive and finite"));
        }
        Ok(())
    }
}

/// The discrete space `V_h` on a mesh.
#[derive(Debug, Clone)]
pub struct WgSpace {
    mesh: Mesh,
    tables: RefTables,
    edge_index: Vec<Option<usize>>,
    n_interior: usize,
    n_free_edges: usize,
}

impl WgSpace {
    pub fn new(mesh: Mesh, k: usize) -> Result<Self> {
        let tables = RefTables::new(k)?;
        let mut n_free_edges = 0;
        let edge_index = mesh
            .edges()
            .iter()
            .map(|e| {
                if e.is_dirichlet() {
                    None
                } else {
                    n_free_edges += 1;
                    Some(n_free_edges - 1)
                }
            })
            .collect();
        let n_interior = mesh.num_triangles() * 2 * tables.dk;
        Ok(Self { mesh, tables, edge_index, n_interior, n_free_edges })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.tables.k
    }

    /// Number of free (unconstrained) dofs.
    pub fn num_dofs(&self) -> usize {
        self.n_interior + self.n_free_edges * 2 * self.tables.ne
    }

    pub fn num_interior_dofs(&self) -> usize {
        self.n_interior
    }

    /// Number of local dofs on one triangle, constrained ones included.
    pub fn local_dim(&self) -> usize {
        self.tables.nloc()
    }

    /// Dimension of scalar `P_k` and `P_{k-1}` on a triangle.
    pub fn poly_dims(&self) -> (usize, usize) {
        (self.tables.dk, self.tables.dk1)
    }

    pub fn interior_dof(&self, t: usize, c: usize, a: usize) -> usize {
        (t * 2 + c) * self.tables.dk + a
    }

    /// `None` for edges on the clamped boundary.
    pub fn edge_dof(&self, e: usize, c: usize, b: usize) -> Option<usize> {
        let ne = self.tables.ne;
        self.edge_index[e].map(|f| self.n_interior + f * 2 * ne + c * ne + b)
    }

    /// Global index (if free) of every local dof of triangle `t`.
    pub fn local_dofs(&self, t: usize, out: &mut Vec<Option<usize>>) {
        let rt = &self.tables;
        out.clear();
        out.extend((0..2 * rt.dk).map(|i| Some(t * 2 * rt.dk + i)));
        for e in self.mesh.triangle_edges(t) {
            for c in 0..2 {
                for b in 0..rt.ne {
                    out.push(self.edge_dof(e, c, b));
                }
            }
        }
    }

    pub(crate) fn tables(&self) -> &RefTables {
        &self.tables
    }

    pub(crate) fn geometry(&self, t: usize) -> Result<ElementGeometry> {
        ElementGeometry::new(&self.mesh, t)
    }

    /// Local stiffness matrix of `a_w` on triangle `t`.
    pub fn local_stiffness(&self, t: usize, params: &WgParams) -> Result<DMatrix<f64>> {
        let geo = self.geometry(t)?;
        Ok(local::local_stiffness(&self.tables, &geo, params.mu, params.lambda, params.delta))
    }

    /// Local coefficients of `v` on triangle `t` (zeros for constrained dofs).
    pub fn gather(&self, t: usize, global: &[f64], dofs: &mut Vec<Option<usize>>) -> Vec<f64> {
        self.local_dofs(t, dofs);
        dofs.iter().map(|d| d.map_or(0.0, |i| global[i])).collect()
    }

    /// Mesh-size factor used by the stabilizer on triangle `t`.
    pub fn stabilizer_size(&self, t: usize) -> Result<f64> {
        Ok(local::stabilizer_size(&self.geometry(t)?))
    }
}

/// A member of `V_h`, stored by its free coefficients.
#[derive(Debug, Clone)]
pub struct WgFunction<'s> {
    space: &'s WgSpace,
    coeffs: Vec<f64>,
}

impl<'s> WgFunction<'s> {
    pub fn zeros(space: &'s WgSpace) -> Self {
        Self { space, coeffs: vec![0.0; space.num_dofs()] }
    }

    pub fn from_coeffs(space: &'s WgSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.num_dofs() {
            return Err(Error::invalid(format!(
                "coefficient vector has length {}, space has {} dofs",
                coeffs.len(),
                space.num_dofs()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn space(&self) -> &'s WgSpace {
        self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// `v0` at physical point `x` of triangle `t`.
    pub fn eval_interior(&self, t: usize, x: Point) -> Result<[f64; 2]> {
        let geo = self.space.geometry(t)?;
        let phi = self.space.tables.basis.eval(geo.map.pullback(x));
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            *o = phi.iter().enumerate().map(|(a, p)| p * self.coeffs[self.space.interior_dof(t, c, a)]).sum();
        }
        Ok(out)
    }

    /// `vb` on edge `e` at parameter `s` in `[0, 1]` (from its lower to its higher vertex).
    pub fn eval_edge(&self, e: usize, s: f64) -> [f64; 2] {
        let psi = self.space.tables.edge_basis.eval(s);
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            *o = psi
                .iter()
                .enumerate()
                .map(|(b, p)| self.space.edge_dof(e, c, b).map_or(0.0, |i| p * self.coeffs[i]))
                .sum();
        }
        out
    }
}

/// `Q_h u`: elementwise and edgewise `L2` projections. Clamped edges get zero.
pub fn project_qh<'s>(space: &'s WgSpace, u: impl Fn(Point) -> [f64; 2] + Sync) -> Result<WgFunction<'s>> {
    let rt = &space.tables;
    let mesh = &space.mesh;
    let tq = triangle_quadrature(2 * rt.k + 6)?;
    let eq = edge_quadrature(2 * rt.k + 6)?;
    let phi: Vec<Vec<f64>> = tq.points.iter().map(|&p| rt.basis.eval(p)).collect();
    let psi: Vec<Vec<f64>> = eq.points.iter().map(|&s| rt.edge_basis.eval(s)).collect();
    let mut coeffs = vec![0.0; space.num_dofs()];

    // orthonormal reference bases: the physical mass matrix is det * I
    let (interior, edges) = coeffs.split_at_mut(space.n_interior);
    interior.par_chunks_mut(2 * rt.dk).enumerate().try_for_each(|(t, out)| -> Result<()> {
        let geo = space.geometry(t)?;
        for (q, (&p, &w)) in tq.points.iter().zip(&tq.weights).enumerate() {
            let val = u(geo.map.map(p));
            for c in 0..2 {
                for a in 0..rt.dk {
                    out[c * rt.dk + a] += w * val[c] * phi[q][a];
                }
            }
        }
        Ok(())
    })?;
    for (e, edge) in mesh.edges().iter().enumerate() {
        let Some(f) = space.edge_index[e] else { continue };
        let [p0, p1] = mesh.edge_points(e);
        let out = &mut edges[f * 2 * rt.ne..(f + 1) * 2 * rt.ne];
        for (q, (&s, &w)) in eq.points.iter().zip(&eq.weights).enumerate() {
            let val = u([p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])]);
            for c in 0..2 {
                for b in 0..rt.ne {
                    out[c * rt.ne + b] += w * val[c] * psi[q][b];
                }
            }
        }
        debug_assert!(!edge.is_dirichlet());
    }
    WgFunction::from_coeffs(space, coeffs)
}

/// Local weak gradient and weak divergence matrices of every triangle,
/// acting on the local dof layout of [`WgSpace::local_dofs`].
pub fn build_weak_operators(space: &WgSpace) -> Result<Vec<WeakOperators>> {
    (0..space.mesh.num_triangles())
        .into_par_iter()
        .map(|t| Ok(local::weak_operators(&space.tables, &space.geometry(t)?)))
        .collect()
}

/// Applies `f` to local stiffness matrices in element order, batch by batch.
pub(crate) fn for_each_local_stiffness(
    space: &WgSpace,
    params: &WgParams,
    mut f: impl FnMut(usize, DMatrix<f64>),
) -> Result<()> {
    let nt = space.mesh.num_triangles();
    for start in (0..nt).step_by(CHUNK) {
        let end = (start + CHUNK).min(nt);
        let batch: Vec<DMatrix<f64>> =
            (start..end).into_par_iter().map(|t| space.local_stiffness(t, params)).collect::<Result<_>>()?;
        for (i, m) in batch.into_iter().enumerate() {
            f(start + i, m);
        }
    }
    Ok(())
}

/// Stiffness `A` of `a_w` and mass `B` of `b_w` on the free dofs.
pub fn assemble_pencil(space: &WgSpace, params: &WgParams) -> Result<SparsePencil> {
    params.validate()?;
    let n = space.num_dofs();
    let mut asm = PatternAssembler::new(n, space.mesh.num_triangles(), |t, out| {
        let mut dofs = Vec::new();
        space.local_dofs(t, &mut dofs);
        out.extend(dofs.into_iter().flatten());
    });
    let mut dofs = Vec::new();
    for_each_local_stiffness(space, params, |t, m| {
        space.local_dofs(t, &mut dofs);
        // nalgebra is column-major; the matrix is symmetric so the slice reads as row-major too
        asm.add(&dofs, m.as_slice());
    })?;
    let a = asm.finish();
    let b = CsrMatrix::diagonal(&mass_diagonal(space)?);
    Ok(SparsePencil { a, b, mu: params.mu, lambda: params.lambda, delta: Some(params.delta) })
}

/// Diagonal of the `b_w` matrix: `det J_T` on interior dofs, zero on edges.
pub fn mass_diagonal(space: &WgSpace) -> Result<Vec<f64>> {
    let mut d = vec![0.0; space.num_dofs()];
    let per = 2 * space.tables.dk;
    for t in 0..space.mesh.num_triangles() {
        let det = space.geometry(t)?.map.det;
        d[t * per..(t + 1) * per].iter_mut().for_each(|x| *x = det);
    }
    Ok(d)
}

/// `(v0, w0)` load for a field evaluated on the interior quadrature points.
/// `f(t, x)` gets the triangle index and the physical point.
pub fn interior_load(space: &WgSpace, f: impl Fn(usize, Point) -> [f64; 2] + Sync) -> Result<Vec<f64>> {
    let rt = &space.tables;
    let mut load = vec![0.0; space.num_dofs()];
    load[..space.n_interior].par_chunks_mut(2 * rt.dk).enumerate().try_for_each(|(t, out)| -> Result<()> {
        let geo = space.geometry(t)?;
        for (q, (&p, &w)) in rt.tri_pts.iter().zip(&rt.tri_w).enumerate() {
            let val = f(t, geo.map.map(p));
            for c in 0..2 {
                for a in 0..rt.dk {
                    out[c * rt.dk + a] += geo.map.det * w * val[c] * rt.phi[q][a];
                }
            }
        }
        Ok(())
    })?;
    Ok(load)
}

/// Solves `a_w(u_h, v) = (f, v0)` for all `v` in `V_h`.
pub fn solve_source<'s>(
    space: &'s WgSpace,
    params: &WgParams,
    f: impl Fn(Point) -> [f64; 2] + Sync,
) -> Result<WgFunction<'s>> {
    params.validate()?;
    if !space.mesh.has_dirichlet() {
        return Err(Error::config("no clamped boundary edge: the source problem is singular"));
    }
    let load = interior_load(space, |_, x| f(x))?;
    let solver = CondensedSolver::new(space, params)?;
    WgFunction::from_coeffs(space, solver.solve(&load))
}

/// The three discrete norms of a WG function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WgNorms {
    /// `sqrt(a_w(v, v))`.
    pub energy: f64,
    /// `sqrt(b_w(v, v))`.
    pub b: f64,
    /// Broken strain of `v0`, `lambda`-weighted weak divergence and
    /// `h_T^-1` weighted jump.
    pub v: f64,
}

pub fn norms(v: &WgFunction<'_>, params: &WgParams) -> Result<WgNorms> {
    let space = v.space;
    let rt = &space.tables;
    let nt = space.mesh.num_triangles();
    let (energy, b, vn) = (0..nt)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64, f64)> {
            let geo = space.geometry(t)?;
            let mut dofs = Vec::new();
            let x = nalgebra::DVector::from_vec(space.gather(t, &v.coeffs, &mut dofs));
            let a = local::local_stiffness(rt, &geo, params.mu, params.lambda, params.delta);
            let energy = x.dot(&(&a * &x));
            let b = geo.map.det * x.rows(0, 2 * rt.dk).norm_squared();

            let ops = local::weak_operators(rt, &geo);
            let div = &ops.d * &x;
            let jump = x.dot(&(local::jump_matrix(rt, &geo) * &x));
            let mut strain = 0.0;
            for (q, w) in rt.tri_w.iter().enumerate() {
                let mut grad = [[0.0; 2]; 2];
                for a in 0..rt.dk {
                    let g = geo.map.physical_gradient(rt.dphi[q][a]);
                    for c in 0..2 {
                        grad[c][0] += x[c * rt.dk + a] * g[0];
                        grad[c][1] += x[c * rt.dk + a] * g[1];
                    }
                }
                let off = 0.5 * (grad[0][1] + grad[1][0]);
                strain += w * geo.map.det * (grad[0][0].powi(2) + grad[1][1].powi(2) + 2.0 * off * off);
            }
            let vn = strain + params.lambda * geo.map.det * div.norm_squared() + jump / geo.diameter;
            Ok((energy, b, vn))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0, 0.0, 0.0), |s, x| (s.0 + x.0, s.1 + x.1, s.2 + x.2));
    Ok(WgNorms { energy: energy.max(0.0).sqrt(), b: b.sqrt(), v: vn.max(0.0).sqrt() })
}

/// `a_w(v, v)` summed triangle by triangle, without assembling `A`.
pub fn energy(space: &WgSpace, params: &WgParams, coeffs: &[f64]) -> Result<f64> {
    let nt = space.mesh.num_triangles();
    let parts = (0..nt)
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(|t| -> Result<f64> {
            let mut dofs = Vec::new();
            let x = nalgebra::DVector::from_vec(space.gather(t, coeffs, &mut dofs));
            let a = space.local_stiffness(t, params)?;
            Ok(x.dot(&(&a * &x)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

/// `b_w(v, v)`.
pub fn mass(space: &WgSpace, coeffs: &[f64]) -> Result<f64> {
    let d = mass_diagonal(space)?;
    Ok(d.iter().zip(coeffs).map(|(m, x)| m * x * x).sum())
}
