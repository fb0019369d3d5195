//! Element kernel: reference tables and per-triangle matrices.
//!
//! Local dof layout on a triangle: interior `c * dk + a` for component `c`
//! and `P_k` basis index `a`, then for local edge `i` the block
//! `2 dk + i * 2 ne + c * ne + b` with `ne = k + 1` edge basis functions.
//! Edge basis functions are parametrized along the global edge direction
//! (lower vertex index to higher) so neighbours share them.

use nalgebra::DMatrix;

use crate::basis::{dim_p, edge_quadrature, triangle_quadrature, AffineMap, PolyBasisEdge, PolyBasisTriangle};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

const REF_VERTICES: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Debug, Clone)]
pub(crate) struct RefTables {
    pub k: usize,
    pub dk: usize,
    pub dk1: usize,
    pub ne: usize,
    pub basis: PolyBasisTriangle,
    pub edge_basis: PolyBasisEdge,
    pub tri_pts: Vec<Point>,
    pub tri_w: Vec<f64>,
    /// `phi[q][a]`, all of `P_k`.
    pub phi: Vec<Vec<f64>>,
    /// Reference gradients `dphi[q][a]`, all of `P_k`.
    pub dphi: Vec<Vec<[f64; 2]>>,
    pub edge_w: Vec<f64>,
    /// `psi[q][b]` on the edge quadrature nodes.
    pub psi: Vec<Vec<f64>>,
    /// `edge_phi[i][o][q][a]`: triangle basis on local edge `i` traversed
    /// forward (`o = 0`) or backward (`o = 1`) relative to local vertex order.
    pub edge_phi: Vec<[Vec<Vec<f64>>; 2]>,
}

impl RefTables {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("polynomial degree k must be at least 1"));
        }
        let basis = PolyBasisTriangle::new(k)?;
        let edge_basis = PolyBasisEdge::new(k);
        let tq = triangle_quadrature(2 * k + 2)?;
        let eq = edge_quadrature(2 * k + 1)?;
        let phi = tq.points.iter().map(|&p| basis.eval(p)).collect();
        let dphi = tq.points.iter().map(|&p| basis.grad(p)).collect();
        let psi = eq.points.iter().map(|&t| edge_basis.eval(t)).collect();
        let edge_phi = (0..3)
            .map(|i| {
                let a = REF_VERTICES[(i + 1) % 3];
                let b = REF_VERTICES[(i + 2) % 3];
                let along = |from: Point, to: Point| -> Vec<Vec<f64>> {
                    eq.points
                        .iter()
                        .map(|&t| basis.eval([from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])]))
                        .collect()
                };
                [along(a, b), along(b, a)]
            })
            .collect();
        Ok(Self {
            k,
            dk: dim_p(k),
            dk1: dim_p(k - 1),
            ne: k + 1,
            basis,
            edge_basis,
            tri_pts: tq.points.clone(),
            tri_w: tq.weights.clone(),
            phi,
            dphi,
            edge_w: eq.weights.clone(),
            psi,
            edge_phi,
        })
    }

    pub fn nloc(&self) -> usize {
        2 * self.dk + 6 * self.ne
    }

    pub fn edge_dof(&self, i: usize, c: usize, b: usize) -> usize {
        2 * self.dk + i * 2 * self.ne + c * self.ne + b
    }
}

/// Geometry of one triangle as seen by the kernel.
#[derive(Debug, Clone)]
pub(crate) struct ElementGeometry {
    pub map: AffineMap,
    pub normals: [Point; 3],
    pub lengths: [f64; 3],
    /// 1 when local edge `i` runs against the global edge direction.
    pub orientation: [usize; 3],
    pub diameter: f64,
}

impl ElementGeometry {
    pub fn new(mesh: &Mesh, t: usize) -> Result<Self> {
        let pts = mesh.triangle_points(t);
        let map = AffineMap::new(&pts).map_err(|_| Error::DegenerateElement { element: t, reason: "zero area".into() })?;
        let tri = mesh.triangles()[t];
        let edges = mesh.triangle_edges(t);
        let mut normals = [[0.0; 2]; 3];
        let mut lengths = [0.0; 3];
        let mut orientation = [0; 3];
        for i in 0..3 {
            normals[i] = mesh.outward_normal(t, i);
            lengths[i] = mesh.edge_length(edges[i]);
            orientation[i] = usize::from(tri[(i + 1) % 3] > tri[(i + 2) % 3]);
        }
        Ok(Self { map, normals, lengths, orientation, diameter: mesh.triangle_diameter(t) })
    }
}

/// Weak gradient and weak divergence of every local dof.
///
/// `g` has rows `(2 i + j) * dk1 + a`: coefficient `a` of entry `(i, j)` of
/// the weak gradient, i.e. of `d v_i / d x_j`. `d` is the trace of `g`.
#[derive(Debug, Clone)]
pub struct WeakOperators {
    pub g: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

pub(crate) fn weak_operators(rt: &RefTables, geo: &ElementGeometry) -> WeakOperators {
    let (dk, dk1, ne) = (rt.dk, rt.dk1, rt.ne);
    let nloc = rt.nloc();
    let det = geo.map.det;
    let mut g = DMatrix::zeros(4 * dk1, nloc);

    // -(v0_i, d_j q_a), the determinant cancels with the mass matrix det * I
    for (q, w) in rt.tri_w.iter().enumerate() {
        for a in 0..dk1 {
            let grad = geo.map.physical_gradient(rt.dphi[q][a]);
            for b in 0..dk {
                let s = -w * rt.phi[q][b];
                for i in 0..2 {
                    for j in 0..2 {
                        g[((2 * i + j) * dk1 + a, i * dk + b)] += s * grad[j];
                    }
                }
            }
        }
    }
    // <vb_i, q_a n_j> on each edge
    for e in 0..3 {
        let o = geo.orientation[e];
        let n = geo.normals[e];
        let scale = geo.lengths[e] / det;
        for (q, w) in rt.edge_w.iter().enumerate() {
            let psi = &rt.psi[q];
            let phi = &rt.edge_phi[e][o][q];
            for a in 0..dk1 {
                for b in 0..ne {
                    let s = w * scale * phi[a] * psi[b];
                    for i in 0..2 {
                        for j in 0..2 {
                            g[((2 * i + j) * dk1 + a, rt.edge_dof(e, i, b))] += s * n[j];
                        }
                    }
                }
            }
        }
    }
    let mut d = DMatrix::zeros(dk1, nloc);
    for a in 0..dk1 {
        for c in 0..nloc {
            d[(a, c)] = g[(a, c)] + g[(3 * dk1 + a, c)];
        }
    }
    WeakOperators { g, d }
}

/// Rows `a`, `dk1 + a`, `2 dk1 + a` give coefficient `a` of the weak strain
/// entries `(1,1)`, `(2,2)` and `sqrt(2) (1,2)`, so that the squared
/// Frobenius norm of the strain is the squared Euclidean norm of the rows.
pub(crate) fn strain_rows(rt: &RefTables, ops: &WeakOperators) -> DMatrix<f64> {
    let dk1 = rt.dk1;
    let nloc = rt.nloc();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(3 * dk1, nloc, |row, c| {
        let a = row % dk1;
        match row / dk1 {
            0 => ops.g[(a, c)],
            1 => ops.g[(3 * dk1 + a, c)],
            _ => r * (ops.g[(dk1 + a, c)] + ops.g[(2 * dk1 + a, c)]),
        }
    })
}

/// `sum_e <v0 - vb, w0 - wb>_e` without the mesh-size weight.
pub(crate) fn jump_matrix(rt: &RefTables, geo: &ElementGeometry) -> DMatrix<f64> {
    let (dk, ne) = (rt.dk, rt.ne);
    let nloc = rt.nloc();
    let mut s = DMatrix::zeros(nloc, nloc);
    let mut row = vec![0.0; nloc];
    for e in 0..3 {
        let o = geo.orientation[e];
        for (q, w) in rt.edge_w.iter().enumerate() {
            let phi = &rt.edge_phi[e][o][q];
            let psi = &rt.psi[q];
            let wq = w * geo.lengths[e];
            for c in 0..2 {
                row.iter_mut().for_each(|x| *x = 0.0);
                for b in 0..dk {
                    row[c * dk + b] = phi[b];
                }
                for b in 0..ne {
                    row[rt.edge_dof(e, c, b)] = -psi[b];
                }
                for (i, &ri) in row.iter().enumerate() {
                    if ri == 0.0 {
                        continue;
                    }
                    for (j, &rj) in row.iter().enumerate() {
                        s[(i, j)] += wq * ri * rj;
                    }
                }
            }
        }
    }
    s
}

/// Mesh-size factor `h_T` of the stabilizer.
pub(crate) fn stabilizer_size(geo: &ElementGeometry) -> f64 {
    geo.diameter
}

/// Local stiffness of `a_w`.
pub(crate) fn local_stiffness(rt: &RefTables, geo: &ElementGeometry, mu: f64, lambda: f64, delta: f64) -> DMatrix<f64> {
    let ops = weak_operators(rt, geo);
    let e = strain_rows(rt, &ops);
    let det = geo.map.det;
    let mut a = e.tr_mul(&e) * (2.0 * mu * det);
    a += ops.d.tr_mul(&ops.d) * (lambda * det);
    a += jump_matrix(rt, geo) * stabilizer_size(geo).powf(-1.0 + delta);
    a
}
