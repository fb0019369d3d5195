//! Enriched Crouzeix-Raviart discretization with an element-wise eliminated pressure.
//!
//! Each velocity component lives in `span{1, x, y, x^2 + y^2}` on every
//! triangle, with the three edge means and the element mean as degrees of
//! freedom. The pressure `p = (lambda + mu) div u` is piecewise constant and
//! is removed triangle by triangle, which leaves the SPD stiffness
//! `mu (grad u, grad v) + (lambda + mu) (P0 div u, P0 div v)`.

use nalgebra::{DMatrix, Matrix4, Vector4};
use rayon::prelude::*;

use crate::basis::{edge_quadrature, triangle_quadrature, AffineMap, Quadrature};
use crate::eigen::SparsePencil;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::sparse::PatternAssembler;

/// The vector ECR space on a fully clamped mesh.
///
/// Full numbering (boundary edges included) of component `c`:
/// `c * (E + T) + e` for edge `e` and `c * (E + T) + E + t` for triangle `t`.
/// Free numbering drops the boundary edges in the same layout.
#[derive(Debug, Clone)]
pub struct EcrSpace {
    mesh: Mesh,
    free_edge: Vec<Option<usize>>,
    n_free_edges: usize,
}

impl EcrSpace {
    pub fn new(mesh: Mesh) -> Result<Self> {
        if mesh.edges().iter().any(|e| e.is_boundary() && !e.is_dirichlet()) {
            return Err(Error::config("the ECR scheme supports fully clamped boundaries only"));
        }
        let mut n_free_edges = 0;
        let free_edge = mesh
            .edges()
            .iter()
            .map(|e| {
                if e.is_boundary() {
                    None
                } else {
                    n_free_edges += 1;
                    Some(n_free_edges - 1)
                }
            })
            .collect();
        Ok(Self { mesh, free_edge, n_free_edges })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn num_dofs(&self) -> usize {
        2 * (self.n_free_edges + self.mesh.num_triangles())
    }

    pub fn num_full_dofs(&self) -> usize {
        2 * (self.mesh.num_edges() + self.mesh.num_triangles())
    }

    fn full_stride(&self) -> usize {
        self.mesh.num_edges() + self.mesh.num_triangles()
    }

    fn free_stride(&self) -> usize {
        self.n_free_edges + self.mesh.num_triangles()
    }

    /// Full indices of the eight local dofs of `t`: component-major, the
    /// three edges in local order, then the element mean.
    pub fn local_full_dofs(&self, t: usize) -> [usize; 8] {
        let edges = self.mesh.triangle_edges(t);
        let (s, ne) = (self.full_stride(), self.mesh.num_edges());
        let mut out = [0; 8];
        for c in 0..2 {
            for i in 0..3 {
                out[4 * c + i] = c * s + edges[i];
            }
            out[4 * c + 3] = c * s + ne + t;
        }
        out
    }

    /// Free index of a full index, `None` on the boundary.
    pub fn free_index(&self, full: usize) -> Option<usize> {
        let (s, ne) = (self.full_stride(), self.mesh.num_edges());
        let (c, r) = (full / s, full % s);
        let local = if r < ne { self.free_edge[r]? } else { self.n_free_edges + (r - ne) };
        Some(c * self.free_stride() + local)
    }

    pub fn local_free_dofs(&self, t: usize) -> [Option<usize>; 8] {
        self.local_full_dofs(t).map(|f| self.free_index(f))
    }

    pub fn free_part(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_dofs()];
        for (i, &v) in full.iter().enumerate() {
            if let Some(f) = self.free_index(i) {
                out[f] = v;
            }
        }
        out
    }

    /// Embeds free coefficients, with zeros on the boundary edges.
    pub fn extend_free(&self, free: &[f64]) -> Vec<f64> {
        (0..self.num_full_dofs()).map(|i| self.free_index(i).map_or(0.0, |f| free[f])).collect()
    }

    pub fn local_basis(&self, t: usize) -> Result<EcrLocalBasis> {
        EcrLocalBasis::new(&self.mesh, t)
    }
}

/// Nodal basis on one triangle: function `i < 3` has unit mean on local edge
/// `i`, function `3` has unit mean over the triangle.
#[derive(Debug, Clone)]
pub struct EcrLocalBasis {
    pub map: AffineMap,
    center: Point,
    scale: f64,
    /// Column `i` holds the shape-function coefficients of nodal function `i`.
    coeffs: Matrix4<f64>,
    pub area: f64,
    pub normals: [Point; 3],
    pub lengths: [f64; 3],
}

impl EcrLocalBasis {
    pub fn new(mesh: &Mesh, t: usize) -> Result<Self> {
        let pts = mesh.triangle_points(t);
        let map = AffineMap::new(&pts).map_err(|_| Error::DegenerateElement { element: t, reason: "zero area".into() })?;
        let center = [(pts[0][0] + pts[1][0] + pts[2][0]) / 3.0, (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0];
        let scale = mesh.triangle_diameter(t);
        let area = 0.5 * map.det;
        let edges = mesh.triangle_edges(t);
        let mut normals = [[0.0; 2]; 3];
        let mut lengths = [0.0; 3];
        for i in 0..3 {
            normals[i] = mesh.outward_normal(t, i);
            lengths[i] = mesh.edge_length(edges[i]);
        }
        let mut basis = Self { map, center, scale, coeffs: Matrix4::identity(), area, normals, lengths };

        let eq = edge_quadrature(2).expect("low degree");
        let tq = triangle_quadrature(2).expect("low degree");
        let mut functionals = Matrix4::zeros();
        for i in 0..3 {
            let a = pts[(i + 1) % 3];
            let b = pts[(i + 2) % 3];
            for (s, w) in eq.iter() {
                let v = basis.shape([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
                for j in 0..4 {
                    functionals[(i, j)] += w * v[j];
                }
            }
        }
        for (p, w) in tq.iter() {
            let v = basis.shape(map.map(p));
            for j in 0..4 {
                functionals[(3, j)] += 2.0 * w * v[j];
            }
        }
        basis.coeffs = functionals
            .try_inverse()
            .ok_or(Error::DegenerateElement { element: t, reason: "ECR functionals are not unisolvent".into() })?;
        Ok(basis)
    }

    fn shape(&self, x: Point) -> Vector4<f64> {
        let xi = (x[0] - self.center[0]) / self.scale;
        let eta = (x[1] - self.center[1]) / self.scale;
        Vector4::new(1.0, xi, eta, xi * xi + eta * eta)
    }

    fn shape_grad(&self, x: Point) -> [Vector4<f64>; 2] {
        let xi = (x[0] - self.center[0]) / self.scale;
        let eta = (x[1] - self.center[1]) / self.scale;
        let s = 1.0 / self.scale;
        [Vector4::new(0.0, s, 0.0, 2.0 * xi * s), Vector4::new(0.0, 0.0, s, 2.0 * eta * s)]
    }

    /// Values of the four nodal functions at `x`.
    pub fn eval(&self, x: Point) -> [f64; 4] {
        let v = self.coeffs.tr_mul(&self.shape(x));
        [v[0], v[1], v[2], v[3]]
    }

    /// Gradients of the four nodal functions at `x`.
    pub fn grad(&self, x: Point) -> [[f64; 2]; 4] {
        let [gx, gy] = self.shape_grad(x);
        let gx = self.coeffs.tr_mul(&gx);
        let gy = self.coeffs.tr_mul(&gy);
        [[gx[0], gy[0]], [gx[1], gy[1]], [gx[2], gy[2]], [gx[3], gy[3]]]
    }

    /// `(grad phi_i, grad phi_j)_T`.
    pub fn stiffness(&self) -> Matrix4<f64> {
        let mut k = Matrix4::zeros();
        for (p, w) in triangle_quadrature(2).expect("low degree").iter() {
            let g = self.grad(self.map.map(p));
            for i in 0..4 {
                for j in 0..4 {
                    k[(i, j)] += w * self.map.det * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
        k
    }

    /// `(phi_i, phi_j)_T`.
    pub fn mass(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for (p, w) in triangle_quadrature(4).expect("low degree").iter() {
            let v = self.eval(self.map.map(p));
            for i in 0..4 {
                for j in 0..4 {
                    m[(i, j)] += w * self.map.det * v[i] * v[j];
                }
            }
        }
        m
    }

    /// Element mean of the divergence of each of the eight vector nodal
    /// functions, from the edge means via the divergence theorem.
    pub fn mean_divergence(&self) -> [f64; 8] {
        let mut d = [0.0; 8];
        for c in 0..2 {
            for i in 0..3 {
                d[4 * c + i] = self.normals[i][c] * self.lengths[i] / self.area;
            }
        }
        d
    }
}

/// Vector ECR function stored on all dofs, boundary edges included.
#[derive(Debug, Clone)]
pub struct EcrFunction<'s> {
    space: &'s EcrSpace,
    coeffs: Vec<f64>,
}

impl<'s> EcrFunction<'s> {
    pub fn from_full(space: &'s EcrSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.num_full_dofs() {
            return Err(Error::invalid("coefficient vector does not match the ECR space"));
        }
        Ok(Self { space, coeffs })
    }

    pub fn from_free(space: &'s EcrSpace, free: &[f64]) -> Result<Self> {
        if free.len() != space.num_dofs() {
            return Err(Error::invalid("coefficient vector does not match the ECR space"));
        }
        Ok(Self { space, coeffs: space.extend_free(free) })
    }

    pub fn space(&self) -> &'s EcrSpace {
        self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn free_coeffs(&self) -> Vec<f64> {
        self.space.free_part(&self.coeffs)
    }

    /// The eight local coefficients on triangle `t`.
    pub fn local(&self, t: usize) -> [f64; 8] {
        self.space.local_full_dofs(t).map(|i| self.coeffs[i])
    }

    pub fn eval(&self, t: usize, x: Point) -> Result<[f64; 2]> {
        let basis = self.space.local_basis(t)?;
        let phi = basis.eval(x);
        let loc = self.local(t);
        Ok([0, 1].map(|c| (0..4).map(|i| loc[4 * c + i] * phi[i]).sum()))
    }
}

/// One value per triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PressureSpace {
    pub num_triangles: usize,
}

impl PressureSpace {
    pub fn new(mesh: &Mesh) -> Self {
        Self { num_triangles: mesh.num_triangles() }
    }

    pub fn dim(&self) -> usize {
        self.num_triangles
    }
}

/// Canonical interpolation: edge means and element means of `u`.
pub fn interpolate_ih<'s>(space: &'s EcrSpace, u: impl Fn(Point) -> [f64; 2] + Sync) -> Result<EcrFunction<'s>> {
    let mesh = &space.mesh;
    let eq = edge_quadrature(12)?;
    let tq = triangle_quadrature(12)?;
    let (s, ne) = (space.full_stride(), mesh.num_edges());
    let mut coeffs = vec![0.0; space.num_full_dofs()];
    let edge_means: Vec<[f64; 2]> = (0..ne).into_par_iter().map(|e| edge_mean(mesh, e, &eq, &u)).collect();
    let elem_means: Vec<[f64; 2]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let pts = mesh.triangle_points(t);
            let map = AffineMap::new(&pts).expect("valid triangle");
            let mut m = [0.0; 2];
            for (p, w) in tq.iter() {
                let v = u(map.map(p));
                m[0] += 2.0 * w * v[0];
                m[1] += 2.0 * w * v[1];
            }
            m
        })
        .collect();
    for c in 0..2 {
        for (e, m) in edge_means.iter().enumerate() {
            coeffs[c * s + e] = m[c];
        }
        for (t, m) in elem_means.iter().enumerate() {
            coeffs[c * s + ne + t] = m[c];
        }
    }
    EcrFunction::from_full(space, coeffs)
}

fn edge_mean(mesh: &Mesh, e: usize, eq: &Quadrature<f64>, u: &impl Fn(Point) -> [f64; 2]) -> [f64; 2] {
    let [a, b] = mesh.edge_points(e);
    let mut m = [0.0; 2];
    for (s, w) in eq.iter() {
        let v = u([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        m[0] += w * v[0];
        m[1] += w * v[1];
    }
    m
}

/// The mixed system on the free velocity dofs and the piecewise constant
/// pressure. Dense storage: intended for checking the condensed pencil on
/// small meshes.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    /// `mu (grad u, grad v)`.
    pub a: DMatrix<f64>,
    /// `(div v, q)`, one row per triangle.
    pub b: DMatrix<f64>,
    /// Diagonal of `1/(lambda + mu) (p, q)`.
    pub d: Vec<f64>,
    /// `(u, v)`.
    pub m: DMatrix<f64>,
}

pub fn assemble_saddle(space: &EcrSpace, pressure: &PressureSpace, mu: f64, lambda: f64) -> Result<SaddleSystem> {
    check_lame(mu, lambda)?;
    let n = space.num_dofs();
    let nt = pressure.dim();
    if nt != space.mesh.num_triangles() {
        return Err(Error::invalid("pressure space belongs to another mesh"));
    }
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(nt, n);
    let mut m = DMatrix::zeros(n, n);
    let mut d = vec![0.0; nt];
    let quad = triangle_quadrature(2)?;
    for t in 0..nt {
        let basis = space.local_basis(t)?;
        let dofs = space.local_free_dofs(t);
        let k = basis.stiffness();
        let mm = basis.mass();
        // (div v, 1)_T by interior quadrature of the divergence
        let mut div = [0.0; 8];
        for (p, w) in quad.iter() {
            let g = basis.grad(basis.map.map(p));
            for c in 0..2 {
                for i in 0..4 {
                    div[4 * c + i] += w * basis.map.det * g[i][c];
                }
            }
        }
        for (li, gi) in dofs.iter().enumerate() {
            let Some(gi) = *gi else { continue };
            b[(t, gi)] += div[li];
            for (lj, gj) in dofs.iter().enumerate() {
                let Some(gj) = *gj else { continue };
                if li / 4 == lj / 4 {
                    a[(gi, gj)] += mu * k[(li % 4, lj % 4)];
                    m[(gi, gj)] += mm[(li % 4, lj % 4)];
                }
            }
        }
        d[t] = basis.area / (lambda + mu);
    }
    Ok(SaddleSystem { a, b, d, m })
}

fn check_lame(mu: f64, lambda: f64) -> Result<()> {
    if !(mu > 0.0 && lambda > 0.0 && mu.is_finite() && lambda.is_finite()) {
        return Err(Error::invalid("Lame parameters must be positive and finite"));
    }
    Ok(())
}

/// Local condensed stiffness and mass on triangle `t`, in the order of
/// [`EcrSpace::local_full_dofs`].
pub fn local_matrices(space: &EcrSpace, t: usize, mu: f64, lambda: f64) -> Result<([f64; 64], [f64; 64])> {
    let basis = space.local_basis(t)?;
    let k = basis.stiffness();
    let m = basis.mass();
    let d = basis.mean_divergence();
    let mut a = [0.0; 64];
    let mut b = [0.0; 64];
    for i in 0..8 {
        for j in 0..8 {
            let mut v = (lambda + mu) * basis.area * d[i] * d[j];
            if i / 4 == j / 4 {
                v += mu * k[(i % 4, j % 4)];
                b[8 * i + j] = m[(i % 4, j % 4)];
            }
            a[8 * i + j] = v;
        }
    }
    Ok((a, b))
}

/// Pencil with the pressure eliminated.
pub fn assemble_condensed(space: &EcrSpace, mu: f64, lambda: f64) -> Result<SparsePencil> {
    check_lame(mu, lambda)?;
    let n = space.num_dofs();
    let nt = space.mesh.num_triangles();
    let pattern = |t: usize, out: &mut Vec<usize>| out.extend(space.local_free_dofs(t).into_iter().flatten());
    let mut asm_a = PatternAssembler::new(n, nt, pattern);
    let mut asm_b = PatternAssembler::new(n, nt, pattern);
    for start in (0..nt).step_by(crate::wg::CHUNK) {
        let end = (start + crate::wg::CHUNK).min(nt);
        let batch = (start..end)
            .into_par_iter()
            .map(|t| local_matrices(space, t, mu, lambda))
            .collect::<Result<Vec<_>>>()?;
        for (i, (a, b)) in batch.iter().enumerate() {
            let dofs = space.local_free_dofs(start + i);
            asm_a.add(&dofs, a);
            asm_b.add(&dofs, b);
        }
    }
    Ok(SparsePencil { a: asm_a.finish(), b: asm_b.finish(), mu, lambda, delta: None })
}

/// `p = (lambda + mu) P0 div u`, one value per triangle.
pub fn recover_pressure(u: &EcrFunction<'_>, mu: f64, lambda: f64) -> Result<Vec<f64>> {
    let space = u.space;
    (0..space.mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let d = space.local_basis(t)?.mean_divergence();
            let loc = u.local(t);
            Ok((lambda + mu) * d.iter().zip(&loc).map(|(a, b)| a * b).sum::<f64>())
        })
        .collect()
}

/// `sqrt(mu sum_T |grad v|^2_T)`.
pub fn ecr_h_norm(v: &EcrFunction<'_>, mu: f64) -> Result<f64> {
    let space = v.space;
    let parts = (0..space.mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let k = space.local_basis(t)?.stiffness();
            let loc = v.local(t);
            let mut s = 0.0;
            for c in 0..2 {
                let x = Vector4::new(loc[4 * c], loc[4 * c + 1], loc[4 * c + 2], loc[4 * c + 3]);
                s += x.dot(&(k * x));
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((mu * parts.iter().sum::<f64>()).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_unit_square, DirichletSpec};
    use approx::assert_relative_eq;

    fn space(n: usize) -> EcrSpace {
        EcrSpace::new(build_unit_square(n, DirichletSpec::All).unwrap()).unwrap()
    }

    #[test]
    fn mixed_boundary_is_rejected() {
        let m = build_unit_square(2, DirichletSpec::Bottom).unwrap();
        assert!(matches!(EcrSpace::new(m), Err(Error::Configuration(_))));
    }

    #[test]
    fn nodal_basis_is_dual_to_the_functionals() {
        let s = space(2);
        let mesh = s.mesh();
        let b = s.local_basis(3).unwrap();
        let edges = mesh.triangle_edges(3);
        for (i, &e) in edges.iter().enumerate() {
            let [p, q] = mesh.edge_points(e);
            // 3-point Gauss is exact for quadratics
            let mut mean = [0.0; 4];
            for (t, w) in edge_quadrature(4).unwrap().iter() {
                let v = b.eval([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                for j in 0..4 {
                    mean[j] += w * v[j];
                }
            }
            for j in 0..4 {
                assert_relative_eq!(mean[j], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn pressure_diagonal() {
        let s = space(2);
        let (mu, lambda) = (0.3, 2.0);
        let sys = assemble_saddle(&s, &PressureSpace::new(s.mesh()), mu, lambda).unwrap();
        for (t, d) in sys.d.iter().enumerate() {
            assert_relative_eq!(*d, s.mesh().triangle_area(t) / (lambda + mu), epsilon = 1e-15);
        }
    }

    #[test]
    fn interpolation_reproduces_the_local_space() {
        let s = space(3);
        for f in [|x: Point| [1.0 + 2.0 * x[0] - x[1], 0.5 * x[1]], |x: Point| [x[0] * x[0] + x[1] * x[1], 0.0]] {
            let v = interpolate_ih(&s, f).unwrap();
            for t in 0..s.mesh().num_triangles() {
                let c = s.mesh().triangle_points(t)[0];
                let x = [c[0] + 0.01, c[1] + 0.02];
                let (got, want) = (v.eval(t, x).unwrap(), f(x));
                assert_relative_eq!(got[0], want[0], epsilon = 1e-12);
                assert_relative_eq!(got[1], want[1], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn condensed_pencil_is_symmetric_and_definite() {
        let s = space(4);
        let p = assemble_condensed(&s, 0.4, 0.4).unwrap();
        assert!(p.a.asymmetry() < 1e-13 && p.b.asymmetry() < 1e-13);
        assert!(crate::eigen::factorize(&p.a).is_ok());
    }

    #[test]
    fn pressure_recovery_matches_the_mixed_equation() {
        let s = space(3);
        let (mu, lambda) = (0.33, 16.4);
        let u = interpolate_ih(&s, |x| [(3.0 * x[0]).sin() * x[1], x[0] * x[0] - x[1]]).unwrap();
        let p = recover_pressure(&u, mu, lambda).unwrap();
        let sys = assemble_saddle(&s, &PressureSpace::new(s.mesh()), mu, lambda).unwrap();
        // (div u, q) - 1/(lambda+mu) (p, q) = 0 for every element indicator q;
        // boundary dofs enter through their full values
        for t in 0..s.mesh().num_triangles() {
            let b = s.local_basis(t).unwrap();
            let div: f64 = b.mean_divergence().iter().zip(&u.local(t)).map(|(a, c)| a * c).sum::<f64>() * b.area;
            assert!((div - sys.d[t] * p[t]).abs() < 1e-12 * (1.0 + div.abs()));
        }
    }
}
