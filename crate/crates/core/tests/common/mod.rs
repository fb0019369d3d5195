//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use elastic_eig::basis::{dim_p, gauss_legendre, AffineMap, PolyBasisEdge, PolyBasisTriangle};
use elastic_eig::mesh::{build_unit_square, BoundaryTag, DirichletSpec, Mesh, Point};
use elastic_eig::wg::{WgParams, WgSpace};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unit-square grid with interior vertices moved by up to `amp` cells.
pub fn perturbed_square(n: usize, amp: f64, seed: u64, spec: DirichletSpec) -> Mesh {
    let base = build_unit_square(n, spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / n as f64;
    let verts: Vec<Point> = base
        .vertices()
        .iter()
        .map(|&[x, y]| {
            let inside = x > 1e-12 && x < 1.0 - 1e-12 && y > 1e-12 && y < 1.0 - 1e-12;
            if inside {
                [x + amp * h * rng.gen_range(-1.0..1.0), y + amp * h * rng.gen_range(-1.0..1.0)]
            } else {
                [x, y]
            }
        })
        .collect();
    let pts = verts.clone();
    Mesh::from_parts(verts, base.triangles().to_vec(), h, |a, b| spec.tag(pts[a], pts[b])).unwrap()
}

/// Collapsed Gauss rule on the reference triangle, collapsing toward
/// `(0, 1)` (the library collapses toward `(1, 0)`).
pub fn ref_quadrature(n: usize) -> Vec<(Point, f64)> {
    let (x, w) = gauss_legendre(n);
    let mut out = Vec::new();
    for (&eta, &we) in x.iter().zip(&w) {
        for (&xi, &wx) in x.iter().zip(&w) {
            out.push(([xi * (1.0 - eta), eta], wx * we * (1.0 - eta)));
        }
    }
    out
}

/// Physical points and weights on triangle `pts`.
pub fn physical_quadrature(pts: &[Point; 3], n: usize) -> Vec<(Point, f64)> {
    let map = AffineMap::new(pts).unwrap();
    ref_quadrature(n).into_iter().map(|(p, w)| (map.map(p), w * map.det)).collect()
}

/// Random polynomial vector field of total degree `deg`.
#[derive(Debug, Clone)]
pub struct PolyField {
    pub deg: usize,
    /// `coef[c][(a, b)]` multiplies `x^a y^b`.
    pub coef: [Vec<(usize, usize, f64)>; 2],
}

impl PolyField {
    pub fn random(deg: usize, rng: &mut impl Rng) -> Self {
        let mk = |rng: &mut dyn rand::RngCore| {
            let mut v = Vec::new();
            for t in 0..=deg {
                for b in 0..=t {
                    v.push((t - b, b, rng.gen_range(-1.0..1.0)));
                }
            }
            v
        };
        Self { deg, coef: [mk(rng), mk(rng)] }
    }

    pub fn eval(&self, p: Point) -> [f64; 2] {
        [0, 1].map(|c| self.coef[c].iter().map(|&(a, b, k)| k * p[0].powi(a as i32) * p[1].powi(b as i32)).sum())
    }

    /// `grad[c][j] = d u_c / d x_j`.
    pub fn grad(&self, p: Point) -> [[f64; 2]; 2] {
        [0, 1].map(|c| {
            let mut g = [0.0; 2];
            for &(a, b, k) in &self.coef[c] {
                if a > 0 {
                    g[0] += k * a as f64 * p[0].powi(a as i32 - 1) * p[1].powi(b as i32);
                }
                if b > 0 {
                    g[1] += k * b as f64 * p[0].powi(a as i32) * p[1].powi(b as i32 - 1);
                }
            }
            g
        })
    }
}

/// Scaled monomials `((x - xc)/s)^a ((y - yc)/s)^b` of degree `<= deg` with gradients.
pub struct Monomials {
    pub center: Point,
    pub scale: f64,
    pub exps: Vec<(usize, usize)>,
}

impl Monomials {
    pub fn new(pts: &[Point; 3], deg: usize) -> Self {
        let center = [(pts[0][0] + pts[1][0] + pts[2][0]) / 3.0, (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0];
        let scale = diameter(pts);
        let mut exps = Vec::new();
        for t in 0..=deg {
            for b in 0..=t {
                exps.push((t - b, b));
            }
        }
        Self { center, scale, exps }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn eval(&self, p: Point) -> Vec<f64> {
        let (x, y) = ((p[0] - self.center[0]) / self.scale, (p[1] - self.center[1]) / self.scale);
        self.exps.iter().map(|&(a, b)| x.powi(a as i32) * y.powi(b as i32)).collect()
    }

    pub fn grad(&self, p: Point) -> Vec<[f64; 2]> {
        let (x, y) = ((p[0] - self.center[0]) / self.scale, (p[1] - self.center[1]) / self.scale);
        let s = self.scale;
        self.exps
            .iter()
            .map(|&(a, b)| {
                let dx = if a > 0 { a as f64 * x.powi(a as i32 - 1) * y.powi(b as i32) / s } else { 0.0 };
                let dy = if b > 0 { b as f64 * x.powi(a as i32) * y.powi(b as i32 - 1) / s } else { 0.0 };
                [dx, dy]
            })
            .collect()
    }

    pub fn mass(&self, quad: &[(Point, f64)]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len(), self.len());
        for &(p, w) in quad {
            let v = self.eval(p);
            for i in 0..self.len() {
                for j in 0..self.len() {
                    m[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        m
    }
}

pub fn diameter(pts: &[Point; 3]) -> f64 {
    let d = |a: Point, b: Point| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    d(pts[0], pts[1]).max(d(pts[1], pts[2])).max(d(pts[2], pts[0]))
}

/// L2 projection of `g` onto the monomials, as coefficients.
pub fn project(mono: &Monomials, quad: &[(Point, f64)], g: impl Fn(Point) -> f64) -> DVector<f64> {
    let m = mono.mass(quad);
    let mut r = DVector::zeros(mono.len());
    for &(p, w) in quad {
        let v = mono.eval(p);
        let gv = g(p);
        for i in 0..mono.len() {
            r[i] += w * gv * v[i];
        }
    }
    m.lu().solve(&r).unwrap()
}

/// One local WG basis function: interior part as a function of the
/// physical point, edge part per local edge as a function of the point.
struct LocalShape {
    comp: usize,
    interior: Option<usize>,
    edge: Option<(usize, usize)>,
}

/// Local edge `i` of triangle `t`: endpoints, outward normal, length and
/// the parametrization origin/end (lower to higher global vertex).
pub struct EdgeInfo {
    pub normal: Point,
    pub length: f64,
    pub from: Point,
    pub to: Point,
}

pub fn edge_info(mesh: &Mesh, t: usize, i: usize) -> EdgeInfo {
    let tri = mesh.triangles()[t];
    let v = mesh.vertices();
    let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
    let (pa, pb) = (v[a], v[b]);
    let d = [pb[0] - pa[0], pb[1] - pa[1]];
    let length = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let (from, to) = if a < b { (pa, pb) } else { (pb, pa) };
    EdgeInfo { normal: [d[1] / length, -d[0] / length], length, from, to }
}

/// Dense local matrices of `a_w` and `b_w` on triangle `t`, in the local
/// layout of `WgSpace::local_dofs`, built from scratch: weak gradients are
/// solved against physical monomials with their own mass matrix.
pub fn wg_local_oracle(space: &WgSpace, t: usize, params: &WgParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let mesh = space.mesh();
    let k = space.degree();
    let (dk, ne) = (dim_p(k), k + 1);
    let basis = PolyBasisTriangle::new(k).unwrap();
    let ebasis = PolyBasisEdge::new(k);
    let pts = mesh.triangle_points(t);
    let map = AffineMap::new(&pts).unwrap();
    let quad = physical_quadrature(&pts, k + 4);
    let (gx, gw) = gauss_legendre(k + 4);
    let edges: Vec<EdgeInfo> = (0..3).map(|i| edge_info(mesh, t, i)).collect();
    let mono = Monomials::new(&pts, k - 1);
    let mass = mono.mass(&quad);
    let mass_lu = mass.clone().lu();

    let mut shapes = Vec::new();
    for c in 0..2 {
        for a in 0..dk {
            shapes.push(LocalShape { comp: c, interior: Some(a), edge: None });
        }
    }
    for i in 0..3 {
        for c in 0..2 {
            for b in 0..ne {
                shapes.push(LocalShape { comp: c, interior: None, edge: Some((i, b)) });
            }
        }
    }
    let n = shapes.len();
    let v0 = |s: &LocalShape, p: Point| -> f64 { s.interior.map_or(0.0, |a| basis.eval(map.pullback(p))[a]) };
    let vb = |s: &LocalShape, i: usize, sp: f64| -> f64 {
        match s.edge {
            Some((e, b)) if e == i => ebasis.eval(sp)[b],
            _ => 0.0,
        }
    };
    let on_edge = |e: &EdgeInfo, sp: f64| -> Point { [e.from[0] + sp * (e.to[0] - e.from[0]), e.from[1] + sp * (e.to[1] - e.from[1])] };

    // weak gradient entry (i, j) and weak divergence, as monomial coefficients
    let mut grads: Vec<[[DVector<f64>; 2]; 2]> = Vec::with_capacity(n);
    for s in &shapes {
        let mut r = [[DVector::zeros(mono.len()), DVector::zeros(mono.len())], [DVector::zeros(mono.len()), DVector::zeros(mono.len())]];
        for &(p, w) in &quad {
            let val = v0(s, p);
            if val == 0.0 {
                continue;
            }
            let dq = mono.grad(p);
            for m in 0..mono.len() {
                for j in 0..2 {
                    r[s.comp][j][m] -= w * val * dq[m][j];
                }
            }
        }
        for (i, e) in edges.iter().enumerate() {
            for (&sp, &w) in gx.iter().zip(&gw) {
                let val = vb(s, i, sp);
                if val == 0.0 {
                    continue;
                }
                let q = mono.eval(on_edge(e, sp));
                for m in 0..mono.len() {
                    for (rj, nj) in r[s.comp].iter_mut().zip(e.normal) {
                        rj[m] += w * e.length * val * q[m] * nj;
                    }
                }
            }
        }
        grads.push(r.map(|row| row.map(|x| mass_lu.solve(&x).unwrap())));
    }

    let h = diameter(&pts);
    let weight = h.powf(-1.0 + params.delta);
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            let (gp, gq) = (&grads[p], &grads[q]);
            let ip = |x: &DVector<f64>, y: &DVector<f64>| x.dot(&(&mass * y));
            let e12p = (&gp[0][1] + &gp[1][0]) * 0.5;
            let e12q = (&gq[0][1] + &gq[1][0]) * 0.5;
            let strain = ip(&gp[0][0], &gq[0][0]) + ip(&gp[1][1], &gq[1][1]) + 2.0 * ip(&e12p, &e12q);
            let dp = &gp[0][0] + &gp[1][1];
            let dq = &gq[0][0] + &gq[1][1];
            let mut v = 2.0 * params.mu * strain + params.lambda * ip(&dp, &dq);
            if shapes[p].comp == shapes[q].comp {
                let mut jump = 0.0;
                for (i, e) in edges.iter().enumerate() {
                    for (&sp, &w) in gx.iter().zip(&gw) {
                        let x = on_edge(e, sp);
                        let jp = v0(&shapes[p], x) - vb(&shapes[p], i, sp);
                        let jq = v0(&shapes[q], x) - vb(&shapes[q], i, sp);
                        jump += w * e.length * jp * jq;
                    }
                }
                v += weight * jump;
                b[(p, q)] = quad.iter().map(|&(x, w)| w * v0(&shapes[p], x) * v0(&shapes[q], x)).sum();
            }
            a[(p, q)] = v;
        }
    }
    (a, b)
}

/// Dense global `A` and `B` assembled from [`wg_local_oracle`].
pub fn wg_dense_oracle(space: &WgSpace, params: &WgParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = space.num_dofs();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    let mut dofs = Vec::new();
    for t in 0..space.mesh().num_triangles() {
        let (la, lb) = wg_local_oracle(space, t, params);
        space.local_dofs(t, &mut dofs);
        for (i, gi) in dofs.iter().enumerate() {
            let Some(gi) = gi else { continue };
            for (j, gj) in dofs.iter().enumerate() {
                let Some(gj) = gj else { continue };
                a[(*gi, *gj)] += la[(i, j)];
                b[(*gi, *gj)] += lb[(i, j)];
            }
        }
    }
    (a, b)
}

/// Finite eigenvalues of `A x = g B x` for SPD `A` and PSD `B` whose null
/// space is spanned by coordinate vectors (zero rows of `B`): eliminate those
/// coordinates by a Schur complement and solve the remaining definite pencil.
pub fn finite_eigenvalues_dense(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let null: Vec<usize> = (0..n).filter(|&i| (0..n).all(|j| b[(i, j)] == 0.0)).collect();
    let range: Vec<usize> = (0..n).filter(|i| !null.contains(i)).collect();
    let pick = |m: &DMatrix<f64>, r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| m[(r[i], c[j])]);
    let arr = pick(a, &range, &range);
    let s = if null.is_empty() {
        arr
    } else {
        let arn = pick(a, &range, &null);
        let ann = pick(a, &null, &null);
        let x = ann.cholesky().unwrap().solve(&arn.transpose());
        arr - &arn * x
    };
    symmetric_definite_eigenvalues(&s, &pick(b, &range, &range))
}

/// Eigenvalues of `K x = g M x` with `M` SPD, ascending.
pub fn symmetric_definite_eigenvalues(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Vec<f64> {
    let l = m.clone().cholesky().unwrap().l();
    let linv = l.clone().try_inverse().unwrap();
    let c = &linv * k * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

pub fn boundary_is(mesh: &Mesh, tag: BoundaryTag) -> usize {
    mesh.edges().iter().filter(|e| e.boundary == Some(tag)).count()
}

/// `u = (s, s)` with `s = sin(pi x) sin(pi y)` and the matching load
/// `f = -div sigma(u)`.
pub fn manufactured(mu: f64, lambda: f64) -> (impl Fn(Point) -> [f64; 2] + Sync + Copy, impl Fn(Point) -> [f64; 2] + Sync + Copy) {
    use std::f64::consts::PI;
    let u = |p: Point| {
        let s = (PI * p[0]).sin() * (PI * p[1]).sin();
        [s, s]
    };
    let f = move |p: Point| {
        let s = (PI * p[0]).sin() * (PI * p[1]).sin();
        let c = (PI * p[0]).cos() * (PI * p[1]).cos();
        let v = 2.0 * mu * PI * PI * s + (lambda + mu) * PI * PI * (s - c);
        [v, v]
    };
    (u, f)
}
