//! Reference-element quadrature, polynomial bases and affine maps.
//!
//! The reference triangle is `{(x, y): x, y >= 0, x + y <= 1}` and the
//! reference edge is `[0, 1]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Highest exactness degree offered by [`triangle_quadrature`].
pub const MAX_TRIANGLE_DEGREE: usize = 30;
/// Highest exactness degree offered by [`edge_quadrature`].
pub const MAX_EDGE_DEGREE: usize = 61;

#[derive(Debug, Clone)]
pub struct Quadrature<P> {
    pub points: Vec<P>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl<P: Copy> Quadrature<P> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (P, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss rule on `[0, 1]` exact for polynomials up to `degree`.
pub fn edge_quadrature(degree: usize) -> Result<Quadrature<f64>> {
    if degree > MAX_EDGE_DEGREE {
        return Err(Error::NotImplemented(format!("edge quadrature of degree {degree}")));
    }
    let n = degree / 2 + 1;
    let (points, weights) = gauss_legendre(n);
    Ok(Quadrature { points, weights, degree })
}

/// Rule on the reference triangle exact up to `degree`.
///
/// Degree 1 is the centroid rule; higher degrees use a collapsed
/// Gauss-Legendre product rule (positive weights, interior points).
pub fn triangle_quadrature(degree: usize) -> Result<Quadrature<Point>> {
    if degree == 0 || degree > MAX_TRIANGLE_DEGREE {
        return Err(Error::NotImplemented(format!("triangle quadrature of degree {degree}")));
    }
    if degree == 1 {
        return Ok(Quadrature { points: vec![[1.0 / 3.0, 1.0 / 3.0]], weights: vec![0.5], degree });
    }
    // x = u, y = (1 - u) v with Jacobian (1 - u): the u-direction sees one extra degree.
    let (us, wu) = gauss_legendre((degree + 2).div_ceil(2));
    let (vs, wv) = gauss_legendre(degree / 2 + 1);
    let mut points = Vec::with_capacity(us.len() * vs.len());
    let mut weights = Vec::with_capacity(us.len() * vs.len());
    for (&u, &a) in us.iter().zip(&wu) {
        for (&v, &b) in vs.iter().zip(&wv) {
            points.push([u, (1.0 - u) * v]);
            weights.push(a * b * (1.0 - u));
        }
    }
    Ok(Quadrature { points, weights, degree })
}

/// Exponent pairs `(a, b)` of `x^a y^b` with `a + b <= degree`, graded by
/// total degree and then by decreasing power of `x`.
pub fn monomial_exponents(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity((degree + 1) * (degree + 2) / 2);
    for total in 0..=degree {
        for b in 0..=total {
            out.push((total - b, b));
        }
    }
    out
}

/// Dimension of `P_k` in two variables.
pub fn dim_p(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Orthonormal basis of `P_k` on the reference triangle.
///
/// The basis is graded: its first `dim_p(j)` members span `P_j` for every
/// `j <= k`. Functions are stored as monomial coefficient rows.
#[derive(Debug, Clone)]
pub struct PolyBasisTriangle {
    degree: usize,
    exponents: Vec<(usize, usize)>,
    coeffs: Vec<Vec<f64>>,
}

impl PolyBasisTriangle {
    pub fn new(degree: usize) -> Result<Self> {
        let exponents = monomial_exponents(degree);
        let n = exponents.len();
        let quad = triangle_quadrature((2 * degree).max(1))?;
        let samples: Vec<Vec<f64>> = quad.points.iter().map(|&p| eval_monomials(&exponents, p)).collect();

        // Gram-Schmidt in the L2(reference) inner product, applied twice.
        let inner = |f: &[f64], g: &[f64]| -> f64 {
            samples
                .iter()
                .zip(&quad.weights)
                .map(|(m, w)| w * dot(f, m) * dot(g, m))
                .sum()
        };
        let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut f = vec![0.0; n];
            f[i] = 1.0;
            for _ in 0..2 {
                for g in &coeffs {
                    let c = inner(&f, g);
                    for (fi, gi) in f.iter_mut().zip(g) {
                        *fi -= c * gi;
                    }
                }
            }
            let norm = inner(&f, &f).sqrt();
            f.iter_mut().for_each(|c| *c /= norm);
            coeffs.push(f);
        }
        Ok(Self { degree, exponents, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, p: Point) -> Vec<f64> {
        let m = eval_monomials(&self.exponents, p);
        self.coeffs.iter().map(|c| dot(c, &m)).collect()
    }

    /// Reference-coordinate gradients of every basis function.
    pub fn grad(&self, p: Point) -> Vec<[f64; 2]> {
        let (dx, dy) = grad_monomials(&self.exponents, p);
        self.coeffs.iter().map(|c| [dot(c, &dx), dot(c, &dy)]).collect()
    }
}

/// Orthonormal (shifted, scaled Legendre) basis of `P_k` on `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct PolyBasisEdge {
    degree: usize,
}

impl PolyBasisEdge {
    pub fn new(degree: usize) -> Self {
        Self { degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let x = 2.0 * t - 1.0;
        let mut out = Vec::with_capacity(self.degree + 1);
        let (mut p0, mut p1) = (1.0, x);
        out.push(1.0);
        if self.degree >= 1 {
            out.push(3f64.sqrt() * x);
        }
        for k in 2..=self.degree {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            out.push(((2 * k + 1) as f64).sqrt() * p2);
            p0 = p1;
            p1 = p2;
        }
        out
    }
}

/// Affine map from the reference triangle onto a physical triangle.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    pub origin: Point,
    /// Columns are `p1 - p0` and `p2 - p0`.
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    /// `J^{-T}`: maps reference gradients to physical gradients.
    pub inv_transpose: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn new(p: &[Point; 3]) -> Result<Self> {
        let j = [[p[1][0] - p[0][0], p[2][0] - p[0][0]], [p[1][1] - p[0][1], p[2][1] - p[0][1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let scale = (j[0][0].abs() + j[0][1].abs() + j[1][0].abs() + j[1][1].abs()).powi(2);
        if det.abs() <= 1e-14 * scale || !det.is_finite() {
            return Err(Error::DegenerateElement { element: usize::MAX, reason: "zero area".into() });
        }
        let inv_transpose = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
        Ok(Self { origin: p[0], jacobian: j, det, inv_transpose })
    }

    pub fn map(&self, r: Point) -> Point {
        let j = &self.jacobian;
        [self.origin[0] + j[0][0] * r[0] + j[0][1] * r[1], self.origin[1] + j[1][0] * r[0] + j[1][1] * r[1]]
    }

    /// Reference coordinates of physical point `x`.
    pub fn pullback(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        // J^{-1} = (J^{-T})^T
        let g = &self.inv_transpose;
        [g[0][0] * d[0] + g[1][0] * d[1], g[0][1] * d[0] + g[1][1] * d[1]]
    }

    pub fn physical_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let m = &self.inv_transpose;
        [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
    }
}

fn eval_monomials(exponents: &[(usize, usize)], p: Point) -> Vec<f64> {
    exponents.iter().map(|&(a, b)| p[0].powi(a as i32) * p[1].powi(b as i32)).collect()
}

fn grad_monomials(exponents: &[(usize, usize)], p: Point) -> (Vec<f64>, Vec<f64>) {
    let pw = |x: f64, e: usize| if e == 0 { 1.0 } else { x.powi(e as i32) };
    let dx = exponents
        .iter()
        .map(|&(a, b)| if a == 0 { 0.0 } else { a as f64 * pw(p[0], a - 1) * pw(p[1], b) })
        .collect();
    let dy = exponents
        .iter()
        .map(|&(a, b)| if b == 0 { 0.0 } else { b as f64 * pw(p[0], a) * pw(p[1], b - 1) })
        .collect();
    (dx, dy)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exact integral of x^a y^b over the reference triangle: a! b! / (a + b + 2)!.
    fn monomial_integral(a: usize, b: usize) -> f64 {
        let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn centroid_rule() {
        let q = triangle_quadrature(1).unwrap();
        assert_eq!(q.points, vec![[1.0 / 3.0, 1.0 / 3.0]]);
        assert_eq!(q.weights, vec![0.5]);
    }

    #[test]
    fn triangle_rules_exact() {
        for degree in 1..=12 {
            let q = triangle_quadrature(degree).unwrap();
            assert!(q.weights.iter().all(|&w| w > 0.0));
            for (a, b) in monomial_exponents(degree) {
                let approx: f64 = q.iter().map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                assert_relative_eq!(approx, monomial_integral(a, b), max_relative = 1e-13);
            }
        }
        let q2 = triangle_quadrature(2).unwrap();
        let x2: f64 = q2.iter().map(|(p, w)| w * p[0] * p[0]).sum();
        assert_relative_eq!(x2, 1.0 / 12.0, max_relative = 1e-14);
        let q6 = triangle_quadrature(6).unwrap();
        let x3y3: f64 = q6.iter().map(|(p, w)| w * (p[0] * p[1]).powi(3)).sum();
        assert_relative_eq!(x3y3, 1.0 / 1120.0, max_relative = 1e-13);
    }

    #[test]
    fn unsupported_degree() {
        assert!(matches!(triangle_quadrature(0), Err(Error::NotImplemented(_))));
        assert!(matches!(triangle_quadrature(MAX_TRIANGLE_DEGREE + 1), Err(Error::NotImplemented(_))));
        assert!(matches!(edge_quadrature(MAX_EDGE_DEGREE + 1), Err(Error::NotImplemented(_))));
    }

    #[test]
    fn edge_rules() {
        let q1 = edge_quadrature(1).unwrap();
        assert_eq!(q1.len(), 1);
        assert_relative_eq!(q1.points[0], 0.5);
        assert_relative_eq!(q1.weights[0], 1.0);
        let q3 = edge_quadrature(3).unwrap();
        assert_eq!(q3.len(), 2);
        assert_relative_eq!(q3.iter().map(|(x, w)| w * x.powi(3)).sum::<f64>(), 0.25, max_relative = 1e-14);
        let q5 = edge_quadrature(5).unwrap();
        assert_eq!(q5.len(), 3);
        assert_relative_eq!(q5.iter().map(|(x, w)| w * x.powi(5)).sum::<f64>(), 1.0 / 6.0, max_relative = 1e-14);
        for degree in 0..=25 {
            let q = edge_quadrature(degree).unwrap();
            let s: f64 = q.iter().map(|(x, w)| w * x.powi(degree as i32)).sum();
            assert_relative_eq!(s, 1.0 / (degree as f64 + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn triangle_basis_is_orthonormal_and_graded() {
        for k in 0..=4 {
            let basis = PolyBasisTriangle::new(k).unwrap();
            assert_eq!(basis.dim(), dim_p(k));
            let q = triangle_quadrature(2 * k + 2).unwrap();
            let n = basis.dim();
            let mut mass = vec![vec![0.0; n]; n];
            for (p, w) in q.iter() {
                let v = basis.eval(p);
                for i in 0..n {
                    for j in 0..n {
                        mass[i][j] += w * v[i] * v[j];
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((mass[i][j] - expect).abs() < 1e-11, "k={k} ({i},{j}) = {}", mass[i][j]);
                }
            }
            // graded: member i only uses monomials of degree <= its own grade
            let exps = monomial_exponents(k);
            for (i, row) in basis.coeffs.iter().enumerate() {
                let grade = exps[i].0 + exps[i].1;
                for (c, &(a, b)) in row.iter().zip(&exps) {
                    if a + b > grade {
                        assert!(c.abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn triangle_basis_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 1..=4 {
            let basis = PolyBasisTriangle::new(k).unwrap();
            for _ in 0..10 {
                let x: f64 = rng.gen_range(0.05..0.9);
                let y: f64 = rng.gen_range(0.05..(0.95 - x));
                let g = basis.grad([x, y]);
                let step = 1e-6;
                let px = basis.eval([x + step, y]);
                let mx = basis.eval([x - step, y]);
                let py = basis.eval([x, y + step]);
                let my = basis.eval([x, y - step]);
                for i in 0..basis.dim() {
                    assert!((g[i][0] - (px[i] - mx[i]) / (2.0 * step)).abs() < 1e-6);
                    assert!((g[i][1] - (py[i] - my[i]) / (2.0 * step)).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn edge_basis_is_orthonormal() {
        for k in 0..=5 {
            let b = PolyBasisEdge::new(k);
            let q = edge_quadrature(2 * k + 1).unwrap();
            for i in 0..=k {
                for j in 0..=k {
                    let s: f64 = q.iter().map(|(t, w)| w * b.eval(t)[i] * b.eval(t)[j]).sum();
                    assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn affine_identity_and_scaling() {
        let id = AffineMap::new(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(id.det, 1.0);
        assert_eq!(id.map([0.3, 0.2]), [0.3, 0.2]);
        let big = AffineMap::new(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]).unwrap();
        assert_eq!(big.det, 4.0);
        assert!(AffineMap::new(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
    }

    #[test]
    fn affine_maps_reference_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p: [Point; 3] = std::array::from_fn(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            let Ok(map) = AffineMap::new(&p) else { continue };
            for (r, x) in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]].iter().zip(&p) {
                let y = map.map(*r);
                assert!((y[0] - x[0]).abs() < 1e-14 && (y[1] - x[1]).abs() < 1e-14);
            }
            let r = [0.2, 0.3];
            let back = map.pullback(map.map(r));
            assert!((back[0] - r[0]).abs() < 1e-12 && (back[1] - r[1]).abs() < 1e-12);
            // gradient of f(x) = x: reference gradient is J^T e_x
            let g = map.physical_gradient([map.jacobian[0][0], map.jacobian[0][1]]);
            assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12);
        }
    }
}
