//! Compressed sparse row storage and element-wise assembly.

use nalgebra::DMatrix;

/// Square CSR matrix with sorted column indices in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self { n: d.len(), row_ptr: (0..=d.len()).collect(), cols: (0..d.len()).collect(), vals: d.to_vec() }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r},{c}) outside {n}x{n}");
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), &t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(p) => self.vals[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            *yi = self.cols[r.clone()].iter().zip(&self.vals[r]).map(|(&c, v)| v * x[c]).sum();
        }
    }

    /// `x^T M y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row(i).map(|(c, v)| v * y[c]).sum::<f64>()).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                m[(i, c)] += v;
            }
        }
        m
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// True when every stored entry of row `i` is zero.
    pub fn row_is_zero(&self, i: usize) -> bool {
        self.row(i).all(|(_, v)| v == 0.0)
    }
}

/// Accumulates element matrices into a fixed sparsity pattern.
///
/// The pattern is the union of the element dof cliques, so every scatter
/// lands on a stored entry.
#[derive(Debug)]
pub struct PatternAssembler {
    matrix: CsrMatrix,
}

impl PatternAssembler {
    /// `element_dofs(e)` lists the free global dofs touched by element `e`.
    pub fn new(n: usize, num_elements: usize, element_dofs: impl Fn(usize, &mut Vec<usize>)) -> Self {
        let mut counts = vec![0usize; n];
        let mut buf = Vec::new();
        for e in 0..num_elements {
            buf.clear();
            element_dofs(e, &mut buf);
            for &r in &buf {
                counts[r] += buf.len();
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for c in &counts {
            start.push(start.last().unwrap() + c);
        }
        let mut raw = vec![0usize; *start.last().unwrap()];
        let mut fill = start.clone();
        for e in 0..num_elements {
            buf.clear();
            element_dofs(e, &mut buf);
            for &r in &buf {
                raw[fill[r]..fill[r] + buf.len()].copy_from_slice(&buf);
                fill[r] += buf.len();
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for r in 0..n {
            let row = &mut raw[start[r]..start[r + 1]];
            row.sort_unstable();
            let mut last = usize::MAX;
            for &c in row.iter() {
                if c != last {
                    cols.push(c);
                    last = c;
                }
            }
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self { matrix: CsrMatrix { n, row_ptr, cols, vals } }
    }

    /// Adds `local[i][j]` to `(dofs[i], dofs[j])`, skipping `None` dofs.
    pub fn add(&mut self, dofs: &[Option<usize>], local: &[f64]) {
        let m = dofs.len();
        debug_assert_eq!(local.len(), m * m);
        let mat = &mut self.matrix;
        for (i, ri) in dofs.iter().enumerate() {
            let Some(r) = *ri else { continue };
            let range = mat.row_ptr[r]..mat.row_ptr[r + 1];
            let cols = &mat.cols[range.clone()];
            for (j, cj) in dofs.iter().enumerate() {
                let Some(c) = *cj else { continue };
                let p = cols.binary_search(&c).expect("entry in assembly pattern");
                mat.vals[range.start + p] += local[i * m + j];
            }
        }
    }

    pub fn finish(self) -> CsrMatrix {
        self.matrix
    }
}
