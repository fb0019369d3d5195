use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use super::{for_each_local_stiffness, WgParams, WgSpace, CHUNK};
use crate::eigen::{factorize, LinearSolver, SparseCholesky};
use crate::error::{Error, Result};
use crate::sparse::PatternAssembler;

struct Block {
    /// Factor of the interior-interior block.
    chol: Cholesky<f64, Dyn>,
    /// `K_II^{-1} K_IE`.
    w: DMatrix<f64>,
}

/// Solver for the WG stiffness matrix that eliminates the interior dofs
/// triangle by triangle and factorizes the remaining edge system.
pub struct CondensedSolver<'s> {
    space: &'s WgSpace,
    blocks: Vec<Block>,
    schur: Option<SparseCholesky>,
    n_edge: usize,
}

impl std::fmt::Debug for CondensedSolver<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CondensedSolver").field("dofs", &self.space.num_dofs()).field("edge_dofs", &self.n_edge).finish()
    }
}

impl<'s> CondensedSolver<'s> {
    pub fn new(space: &'s WgSpace, params: &WgParams) -> Result<Self> {
        params.validate()?;
        let rt = space.tables();
        let ni = 2 * rt.dk;
        let nb = 6 * rt.ne;
        let n_int = space.num_interior_dofs();
        let n_edge = space.num_dofs() - n_int;
        let nt = space.mesh().num_triangles();

        let edge_dofs = |t: usize, out: &mut Vec<Option<usize>>| {
            space.local_dofs(t, out);
            out.drain(..ni);
            out.iter_mut().for_each(|d| *d = d.map(|i| i - n_int));
        };
        let mut asm = PatternAssembler::new(n_edge, nt, |t, out| {
            let mut dofs = Vec::new();
            edge_dofs(t, &mut dofs);
            out.extend(dofs.into_iter().flatten());
        });

        let mut blocks = Vec::with_capacity(nt);
        let mut pending: Vec<DMatrix<f64>> = Vec::with_capacity(CHUNK);
        let mut dofs = Vec::new();
        let mut flush = |pending: &mut Vec<DMatrix<f64>>, first: usize, asm: &mut PatternAssembler| -> Result<()> {
            let reduced: Vec<(Block, DMatrix<f64>)> = pending
                .par_drain(..)
                .enumerate()
                .map(|(i, k)| {
                    let kii = k.view((0, 0), (ni, ni)).into_owned();
                    let kie = k.view((0, ni), (ni, nb)).into_owned();
                    let kee = k.view((ni, ni), (nb, nb)).into_owned();
                    let chol = Cholesky::new(kii).ok_or(Error::DegenerateElement {
                        element: first + i,
                        reason: "interior block is not positive definite".into(),
                    })?;
                    let w = chol.solve(&kie);
                    let mut s = kee - kie.tr_mul(&w);
                    s = (&s + s.transpose()) * 0.5;
                    Ok((Block { chol, w }, s))
                })
                .collect::<Result<_>>()?;
            for (i, (block, s)) in reduced.into_iter().enumerate() {
                edge_dofs(first + i, &mut dofs);
                asm.add(&dofs, s.as_slice());
                blocks.push(block);
            }
            Ok(())
        };
        let mut first = 0;
        let mut failure = None;
        for_each_local_stiffness(space, params, |t, k| {
            if failure.is_some() {
                return;
            }
            if pending.is_empty() {
                first = t;
            }
            pending.push(k);
            if pending.len() == CHUNK || t + 1 == nt {
                if let Err(e) = flush(&mut pending, first, &mut asm) {
                    failure = Some(e);
                }
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        let schur = if n_edge > 0 { Some(factorize(&asm.finish())?) } else { None };
        Ok(Self { space, blocks, schur, n_edge })
    }

    pub fn space(&self) -> &'s WgSpace {
        self.space
    }
}

impl LinearSolver for CondensedSolver<'_> {
    fn dim(&self) -> usize {
        self.space.num_dofs()
    }

    fn solve_many(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let space = self.space;
        let rt = space.tables();
        let ni = 2 * rt.dk;
        let n_int = space.num_interior_dofs();
        let nt = space.mesh().num_triangles();

        // reduced right-hand sides g = F_E - W^T F_I
        let mut reduced: Vec<Vec<f64>> = rhs.iter().map(|f| f[n_int..].to_vec()).collect();
        let mut dofs = Vec::new();
        for start in (0..nt).step_by(CHUNK) {
            let end = (start + CHUNK).min(nt);
            let contrib: Vec<Vec<DVector<f64>>> = (start..end)
                .into_par_iter()
                .map(|t| {
                    rhs.iter()
                        .map(|f| self.blocks[t].w.tr_mul(&DVector::from_column_slice(&f[t * ni..(t + 1) * ni])))
                        .collect()
                })
                .collect();
            for (i, per_rhs) in contrib.into_iter().enumerate() {
                let t = start + i;
                space.local_dofs(t, &mut dofs);
                for (g, c) in reduced.iter_mut().zip(per_rhs) {
                    for (d, v) in dofs[ni..].iter().zip(c.iter()) {
                        if let Some(d) = d {
                            g[d - n_int] -= v;
                        }
                    }
                }
            }
        }
        let edge = match &self.schur {
            Some(s) => s.solve_many(&reduced),
            None => reduced,
        };

        rhs.iter()
            .zip(edge)
            .map(|(f, ue)| {
                let mut u = vec![0.0; space.num_dofs()];
                u[n_int..].copy_from_slice(&ue);
                u[..n_int].par_chunks_mut(ni).enumerate().for_each(|(t, out)| {
                    let mut dofs = Vec::new();
                    space.local_dofs(t, &mut dofs);
                    let local_e =
                        DVector::from_iterator(dofs.len() - ni, dofs[ni..].iter().map(|d| d.map_or(0.0, |i| ue[i - n_int])));
                    let fi = DVector::from_column_slice(&f[t * ni..(t + 1) * ni]);
                    let x = self.blocks[t].chol.solve(&fi) - &self.blocks[t].w * local_e;
                    out.copy_from_slice(x.as_slice());
                });
                u
            })
            .collect()
    }
}
