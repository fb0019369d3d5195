//! Triangulations of the unit square and the L-shaped domain.
//!
//! Every cell of the structured grid is split along its lower-left to
//! upper-right diagonal. Triangles are stored counterclockwise; local edge
//! `i` of a triangle is the edge opposite its local vertex `i`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

impl BoundaryTag {
    fn letter(self) -> char {
        match self {
            BoundaryTag::Dirichlet => 'D',
            BoundaryTag::Neumann => 'N',
        }
    }
}

/// Selects which boundary edges carry the homogeneous Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirichletSpec {
    /// Whole boundary clamped.
    All,
    /// Only the segment `{(x, 0)}` is clamped, the rest is traction free.
    Bottom,
    /// No clamped edge at all. Only useful to exercise the error path.
    Nothing,
}

impl DirichletSpec {
    pub fn tag(self, a: Point, b: Point) -> BoundaryTag {
        let dirichlet = match self {
            DirichletSpec::All => true,
            DirichletSpec::Bottom => a[1].abs() < 1e-12 && b[1].abs() < 1e-12,
            DirichletSpec::Nothing => false,
        };
        if dirichlet {
            BoundaryTag::Dirichlet
        } else {
            BoundaryTag::Neumann
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoints with `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent triangles in increasing index order (one or two).
    pub triangles: Vec<usize>,
    /// `Some` exactly for boundary edges.
    pub boundary: Option<BoundaryTag>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.boundary.is_some()
    }

    pub fn is_dirichlet(&self) -> bool {
        self.boundary == Some(BoundaryTag::Dirichlet)
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
    h: f64,
    cell_size: f64,
    parent: Option<Vec<usize>>,
}

impl Mesh {
    /// Builds the topology from counterclockwise triangles. `tag` classifies
    /// each boundary edge from its endpoint indices.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        cell_size: f64,
        mut tag: impl FnMut(usize, usize) -> BoundaryTag,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::invalid("mesh has no triangles"));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::invalid(format!("triangle {t} references a missing vertex")));
            }
            if signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) <= 0.0 {
                return Err(Error::DegenerateElement {
                    element: t,
                    reason: "triangle is degenerate or clockwise".into(),
                });
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 3 / 2 + 8);
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge { vertices: [key.0, key.1], triangles: Vec::with_capacity(2), boundary: None });
                    edges.len() - 1
                });
                edges[id].triangles.push(t);
                *slot = id;
            }
            triangle_edges.push(local);
        }
        for (id, e) in edges.iter_mut().enumerate() {
            match e.triangles.len() {
                1 => e.boundary = Some(tag(e.vertices[0], e.vertices[1])),
                2 => {}
                n => {
                    return Err(Error::invalid(format!("edge {id} is shared by {n} triangles")));
                }
            }
        }

        let h = triangles
            .iter()
            .map(|tri| diameter(&[vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]))
            .fold(0.0, f64::max);

        Ok(Self { vertices, triangles, edges, triangle_edges, h, cell_size, parent: None })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Global edge ids of triangle `t`; entry `i` is opposite local vertex `i`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Largest triangle diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Edge length of the structured grid cells (the `h` quoted in result tables).
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Fine triangle -> coarse triangle of the previous refinement level.
    pub fn parent(&self) -> Option<&[usize]> {
        self.parent.as_deref()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn triangle_diameter(&self, t: usize) -> f64 {
        diameter(&self.triangle_points(t))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn edge_points(&self, e: usize) -> [Point; 2] {
        let [a, b] = self.edges[e].vertices;
        [self.vertices[a], self.vertices[b]]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edge_points(e);
        dist(a, b)
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edge_points(e);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Outward unit normal of local edge `i` of triangle `t`.
    pub fn outward_normal(&self, t: usize, i: usize) -> Point {
        let tri = self.triangles[t];
        let a = self.vertices[tri[(i + 1) % 3]];
        let b = self.vertices[tri[(i + 2) % 3]];
        let len = dist(a, b);
        [(b[1] - a[1]) / len, -(b[0] - a[0]) / len]
    }

    /// Unit normal of edge `e`. For an interior edge it points from the
    /// lower-indexed adjacent triangle into the higher one; on the boundary
    /// it is the outward normal.
    pub fn edge_normal(&self, e: usize) -> Point {
        let t = self.edges[e].triangles[0];
        let i = self.triangle_edges[t].iter().position(|&x| x == e).expect("edge/triangle link");
        self.outward_normal(t, i)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn count_boundary(&self, tag: BoundaryTag) -> usize {
        self.edges.iter().filter(|e| e.boundary == Some(tag)).count()
    }

    pub fn has_dirichlet(&self) -> bool {
        self.edges.iter().any(Edge::is_dirichlet)
    }

    /// Splits every triangle into four through its edge midpoints.
    pub fn refine_uniform(&self) -> Mesh {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend((0..self.edges.len()).map(|e| self.edge_midpoint(e)));

        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut parent = Vec::with_capacity(4 * self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = *tri;
            let te = self.triangle_edges[t];
            // midpoint opposite local vertex i
            let (ma, mb, mc) = (nv + te[0], nv + te[1], nv + te[2]);
            triangles.push([a, mc, mb]);
            triangles.push([mc, b, ma]);
            triangles.push([mb, ma, c]);
            triangles.push([ma, mb, mc]);
            parent.extend([t; 4]);
        }

        let tag = |a: usize, b: usize| {
            let (old, mid) = if a < nv { (a, b) } else { (b, a) };
            debug_assert!(old < nv && mid >= nv);
            self.edges[mid - nv].boundary.expect("refined boundary edge lies on a coarse boundary edge")
        };
        let mut fine = Mesh::from_parts(vertices, triangles, 0.5 * self.cell_size, tag)
            .expect("refinement of a valid mesh is valid");
        fine.parent = Some(parent);
        fine
    }

    /// Refines `levels` times. The parent map of the result points straight
    /// back into `self`; `levels = 0` gives a copy with the identity map.
    pub fn refine_nested(&self, levels: usize) -> Mesh {
        let mut fine = self.clone();
        let mut map: Vec<usize> = (0..self.num_triangles()).collect();
        for _ in 0..levels {
            fine = fine.refine_uniform();
            let parent = fine.parent.as_ref().expect("refined mesh has parents");
            map = parent.iter().map(|&p| map[p]).collect();
        }
        fine.parent = Some(map);
        fine
    }

    /// Deterministic plain-text form; see [`Mesh::from_text`].
    pub fn to_text(&self) -> String {
        let mut order: Vec<usize> = (0..self.vertices.len()).collect();
        order.sort_by(|&i, &j| {
            let (p, q) = (self.vertices[i], self.vertices[j]);
            p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]))
        });
        let mut new_id = vec![0usize; order.len()];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }

        let mut tris: Vec<[usize; 3]> = self
            .triangles
            .iter()
            .map(|tri| {
                let t = [new_id[tri[0]], new_id[tri[1]], new_id[tri[2]]];
                let r = (0..3).min_by_key(|&i| t[i]).unwrap();
                [t[r], t[(r + 1) % 3], t[(r + 2) % 3]]
            })
            .collect();
        tris.sort_by_key(|t| {
            let mut s = *t;
            s.sort_unstable();
            s
        });

        let mut boundary: Vec<(usize, usize, BoundaryTag)> = self
            .edges
            .iter()
            .filter_map(|e| {
                e.boundary.map(|tag| {
                    let (a, b) = (new_id[e.vertices[0]], new_id[e.vertices[1]]);
                    (a.min(b), a.max(b), tag)
                })
            })
            .collect();
        boundary.sort_by_key(|&(a, b, _)| (a, b));

        let mut out = String::new();
        let _ = writeln!(out, "VERTICES {}", order.len());
        for &old in &order {
            let p = self.vertices[old];
            let _ = writeln!(out, "{:.17e} {:.17e}", p[0], p[1]);
        }
        let _ = writeln!(out, "TRIANGLES {}", tris.len());
        for t in &tris {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(out, "BOUNDARY {}", boundary.len());
        for (a, b, tag) in &boundary {
            let _ = writeln!(out, "{a} {b} {}", tag.letter());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut reader = LineReader::new(text);

        let nv = reader.header("VERTICES")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (no, parts) = reader.fields(2)?;
            let x: f64 = parts[0].parse().map_err(|_| parse_error(no, "bad coordinate"))?;
            let y: f64 = parts[1].parse().map_err(|_| parse_error(no, "bad coordinate"))?;
            vertices.push([x, y]);
        }

        let nt = reader.header("TRIANGLES")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (no, parts) = reader.fields(3)?;
            let mut t = [0usize; 3];
            for (slot, s) in t.iter_mut().zip(&parts) {
                *slot = s.parse().map_err(|_| parse_error(no, "bad vertex index"))?;
            }
            triangles.push(t);
        }

        let nb = reader.header("BOUNDARY")?;
        let mut tags = HashMap::with_capacity(nb);
        for _ in 0..nb {
            let (no, parts) = reader.fields(3)?;
            let a: usize = parts[0].parse().map_err(|_| parse_error(no, "bad vertex index"))?;
            let b: usize = parts[1].parse().map_err(|_| parse_error(no, "bad vertex index"))?;
            let tag = match parts[2] {
                "D" => BoundaryTag::Dirichlet,
                "N" => BoundaryTag::Neumann,
                _ => return Err(parse_error(no, "tag must be D or N")),
            };
            tags.insert((a.min(b), a.max(b)), tag);
        }

        let cell_size = triangles
            .iter()
            .flat_map(|t| (0..3).map(move |i| (t[i], t[(i + 1) % 3])))
            .filter(|&(a, b)| a < vertices.len() && b < vertices.len())
            .map(|(a, b)| dist(vertices[a], vertices[b]))
            .fold(f64::INFINITY, f64::min);
        let mut missing = None;
        let mesh = Mesh::from_parts(vertices, triangles, cell_size, |a, b| {
            tags.get(&(a, b)).copied().unwrap_or_else(|| {
                missing = Some((a, b));
                BoundaryTag::Neumann
            })
        })?;
        if let Some((a, b)) = missing {
            return Err(Error::Parse { line: 0, message: format!("boundary edge {a}-{b} has no tag") });
        }
        Ok(mesh)
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_text(path: impl AsRef<Path>) -> Result<Mesh> {
        Mesh::from_text(&std::fs::read_to_string(path)?)
    }
}

/// `n x n` cells on `(0,1)^2`.
pub fn build_unit_square(n: usize, dirichlet: DirichletSpec) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::invalid("unit square needs n >= 1"));
    }
    build_from_cells(n, n, n, |_, _| true, dirichlet)
}

/// `(0,2)^2` minus `(1,2)^2`, cells of size `1/n`, clamped everywhere.
pub fn build_lshape(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::invalid("L-shape needs n >= 1"));
    }
    build_from_cells(2 * n, 2 * n, n, |i, j| !(i >= n && j >= n), DirichletSpec::All)
}

fn build_from_cells(
    nx: usize,
    ny: usize,
    per_unit: usize,
    keep: impl Fn(usize, usize) -> bool,
    dirichlet: DirichletSpec,
) -> Result<Mesh> {
    let step = 1.0 / per_unit as f64;
    let mut index = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut used = vec![false; (nx + 1) * (ny + 1)];
    for j in 0..ny {
        for i in 0..nx {
            if keep(i, j) {
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    used[grid(i + di, j + dj)] = true;
                }
            }
        }
    }
    for j in 0..=ny {
        for i in 0..=nx {
            if used[grid(i, j)] {
                index[grid(i, j)] = vertices.len();
                vertices.push([i as f64 * step, j as f64 * step]);
            }
        }
    }
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let ll = index[grid(i, j)];
            let lr = index[grid(i + 1, j)];
            let ul = index[grid(i, j + 1)];
            let ur = index[grid(i + 1, j + 1)];
            triangles.push([ll, lr, ur]);
            triangles.push([ll, ur, ul]);
        }
    }
    let pts = vertices.clone();
    Mesh::from_parts(vertices, triangles, step, |a, b| dirichlet.tag(pts[a], pts[b]))
}

/// Maps every triangle of `fine` to its ancestor in a mesh `levels`
/// refinements coarser. Requires a chain of refinements recorded on `chain`,
/// ordered from coarse to fine and ending with `fine`.
pub fn ancestors(chain: &[&Mesh]) -> Result<Vec<usize>> {
    let fine = chain.last().ok_or_else(|| Error::invalid("empty mesh chain"))?;
    let mut map: Vec<usize> = (0..fine.num_triangles()).collect();
    for mesh in chain.iter().skip(1).rev() {
        let parent = mesh.parent().ok_or_else(|| Error::invalid("mesh has no parent map"))?;
        for m in map.iter_mut() {
            *m = parent[*m];
        }
    }
    Ok(map)
}

struct LineReader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l)).collect();
        Self { lines, pos: 0 }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        let line = self.lines.get(self.pos).copied().ok_or(Error::Parse {
            line: self.lines.last().map_or(0, |l| l.0),
            message: "unexpected end of file".into(),
        })?;
        self.pos += 1;
        Ok(line)
    }

    fn fields(&mut self, count: usize) -> Result<(usize, Vec<&'a str>)> {
        let (no, line) = self.next_line()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != count {
            return Err(parse_error(no, &format!("expected {count} fields")));
        }
        Ok((no, parts))
    }

    fn header(&mut self, name: &str) -> Result<usize> {
        let (no, parts) = self.fields(2)?;
        if parts[0] != name {
            return Err(parse_error(no, &format!("expected {name} header")));
        }
        parts[1].parse().map_err(|_| parse_error(no, "bad count"))
    }
}

fn parse_error(line: usize, message: &str) -> Error {
    Error::Parse { line, message: message.into() }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn diameter(p: &[Point; 3]) -> f64 {
    dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]))
}
