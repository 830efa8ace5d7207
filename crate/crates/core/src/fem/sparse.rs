//! Compressed sparse rows and an envelope Cholesky factorization.

use crate::error::{Error, Result};

/// Square sparse matrix in CSR layout, both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut data: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last = None;
        for (i, j, v) in trip {
            if last == Some((i, j)) {
                *data.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            indices.push(j);
            data.push(v);
            indptr[i + 1] += 1;
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// `(col, value)` pairs of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.data[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.data[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, a)| a * x[j]).sum())
            .collect()
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, a)| a * y[j]).sum::<f64>())
            .sum()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, a)| (a - self.get(j, i)).abs() <= tol))
    }
}

/// Reverse Cuthill-McKee ordering of the graph given by `adj`; returns
/// `order[new] = old`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !placed[v])
            .min_by_key(|&v| adj[v].len())
            .unwrap();
        let start = pseudo_peripheral(adj, seed, &placed);
        let head = order.len();
        order.push(start);
        placed[start] = true;
        let mut q = head;
        while q < order.len() {
            let v = order[q];
            q += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !placed[w]).collect();
            next.sort_unstable_by_key(|&w| (adj[w].len(), w));
            for w in next {
                placed[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], start: usize, blocked: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = blocked.to_vec();
    seen[start] = true;
    let mut levels = vec![vec![start]];
    loop {
        let mut next = Vec::new();
        for &v in levels.last().unwrap() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        levels.push(next);
    }
}

fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize, blocked: &[bool]) -> usize {
    let mut v = seed;
    let mut depth = bfs_levels(adj, v, blocked).len();
    loop {
        let levels = bfs_levels(adj, v, blocked);
        let cand = *levels
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&w| adj[w].len())
            .unwrap();
        let d = bfs_levels(adj, cand, blocked).len();
        if d <= depth {
            return v;
        }
        v = cand;
        depth = d;
    }
}

/// `L Lᵀ` factor of a symmetric positive definite matrix stored by rows
/// within its envelope. Rows are in the permuted order chosen by RCM.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    /// `perm[new] = old`
    pub perm: Vec<usize>,
    /// `first[i]`: first stored column of row `i`
    pub first: Vec<usize>,
    start: Vec<usize>,
    vals: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.size();
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
            .collect();
        let perm = reverse_cuthill_mckee(&adj);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(perm[i]).map(|(j, _)| inv[j]).fold(i, usize::min))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + i - first[i] + 1);
        }
        let mut vals = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(perm[i]) {
                let j = inv[j];
                if j <= i {
                    vals[start[i] + j - first[i]] = v;
                }
            }
        }
        let mut f = Self {
            perm,
            first,
            start,
            vals,
        };
        f.factor_in_place()?;
        Ok(f)
    }

    fn factor_in_place(&mut self) -> Result<()> {
        let n = self.first.len();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let k0 = fi.max(fj);
                let (head, row_i) = self.vals.split_at_mut(si);
                let li = &row_i[k0 - fi..j - fi];
                let lj = &head[sj + k0 - fj..sj + j - fj];
                let dot: f64 = li.iter().zip(lj).map(|(a, b)| a * b).sum();
                let djj = head[sj + j - fj];
                row_i[j - fi] = (row_i[j - fi] - dot) / djj;
            }
            let row = &self.vals[si..si + i - fi];
            let d = self.vals[si + i - fi] - row.iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SolverFailure(format!(
                    "interior block is not positive definite at pivot {i}"
                )));
            }
            self.vals[si + i - fi] = d.sqrt();
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.first.len()
    }

    pub fn envelope_len(&self) -> usize {
        self.vals.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.vals[self.start[i]..self.start[i + 1]]
    }

    /// Solves `A x = b` for one right-hand side in the original ordering.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let r = self.row(i);
            let fi = self.first[i];
            let s: f64 = r[..i - fi].iter().zip(&y[fi..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - s) / r[i - fi];
        }
        for i in (0..n).rev() {
            let r = self.row(i);
            let fi = self.first[i];
            y[i] /= r[i - fi];
            let yi = y[i];
            for (yk, l) in y[fi..i].iter_mut().zip(&r[..i - fi]) {
                *yk -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// In-place `L⁻ᵀ z` for a vector in permuted order.
    pub fn backward(&self, z: &mut [f64]) {
        for i in (0..self.size()).rev() {
            let r = self.row(i);
            let fi = self.first[i];
            z[i] /= r[i - fi];
            let zi = z[i];
            for (zk, l) in z[fi..i].iter_mut().zip(&r[..i - fi]) {
                *zk -= l * zi;
            }
        }
    }

    /// In-place `L⁻¹ Y` for a row-major block `y` (permuted rows, `m`
    /// columns). `width[i]` bounds the nonzero columns of row `i` of the
    /// result and must be nondecreasing in `i`.
    pub fn forward_block(&self, y: &mut [f64], m: usize, width: &[usize]) {
        let n = self.size();
        for i in 0..n {
            let r = self.row(i);
            let fi = self.first[i];
            let w = width[i];
            if w == 0 {
                continue;
            }
            let (done, rest) = y.split_at_mut(i * m);
            let yi = &mut rest[..w];
            for (k, &l) in (fi..i).zip(&r[..i - fi]) {
                if l == 0.0 {
                    continue;
                }
                let wk = width[k].min(w);
                let yk = &done[k * m..k * m + wk];
                for (a, b) in yi[..wk].iter_mut().zip(yk) {
                    *a -= l * b;
                }
            }
            let d = r[i - fi];
            for a in yi.iter_mut() {
                *a /= d;
            }
        }
    }
}
