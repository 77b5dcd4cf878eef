//! Compressed sparse row storage.

use crate::error::{Error, Result};
use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Compressed sparse row matrix over `f64`.
///
/// Columns are strictly increasing within each row and duplicates are never
/// stored. Explicit zeros are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, validating every structural invariant.
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 {
            return Err(Error::Structure(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                nrows + 1
            )));
        }
        if row_ptr[0] != 0 || row_ptr[nrows] != col_idx.len() || col_idx.len() != values.len() {
            return Err(Error::Structure("row_ptr does not bracket the entries".into()));
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::Structure(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for (k, &c) in cols.iter().enumerate() {
                if c >= ncols {
                    return Err(Error::Structure(format!(
                        "column {c} out of range in row {i} (ncols = {ncols})"
                    )));
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(Error::Structure(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(triplets: &[(usize, usize, f64)], nrows: usize, ncols: usize) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::Structure(format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|&(c, _)| c);
            for &(c, v) in &scratch {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn to_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.push((i, self.col_idx[k], self.values[k]));
            }
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Stored value at `(i, j)`, zero when the entry is outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    fn check_vec(&self, x: &[f64], n: usize, what: &str) -> Result<()> {
        if x.len() != n {
            return Err(Error::Dimension(format!(
                "{what}: {}x{} matrix applied to vector of length {}",
                self.nrows,
                self.ncols,
                x.len()
            )));
        }
        Ok(())
    }

    /// `y = A x`
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = A x` into a caller-provided buffer. Each row is reduced in stored
    /// column order, so the result does not depend on how rows are scheduled.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_vec(x, self.ncols, "spmv")?;
        self.check_vec(y, self.nrows, "spmv output")?;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
        Ok(())
    }

    /// `y = Aᵀ x`
    pub fn spmv_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_vec(x, self.nrows, "spmv_t")?;
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[k];
                col_idx[next[c]] = i;
                values[next[c]] = self.values[k];
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// Sparse product `self · rhs` (row-wise Gustavson).
    pub fn matmul(&self, rhs: &CsrMatrix) -> Result<Self> {
        if self.ncols != rhs.nrows {
            return Err(Error::Dimension(format!(
                "matmul: {}x{} times {}x{}",
                self.nrows, self.ncols, rhs.nrows, rhs.ncols
            )));
        }
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut acc = vec![0.0; rhs.ncols];
        let mut marker = vec![usize::MAX; rhs.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.values[k];
                let r = self.col_idx[k];
                for kk in rhs.row_ptr[r]..rhs.row_ptr[r + 1] {
                    let c = rhs.col_idx[kk];
                    if marker[c] != i {
                        marker[c] = i;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * rhs.values[kk];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                col_idx.push(c);
                values.push(acc[c]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: rhs.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// `a · self + b · other` on the union pattern.
    pub fn add_scaled(&self, a: f64, other: &CsrMatrix, b: f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "add: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let take_a = q >= cb.len() || (p < ca.len() && ca[p] <= cb[q]);
                let take_b = p >= ca.len() || (q < cb.len() && cb[q] <= ca[p]);
                let mut v = 0.0;
                let c;
                if take_a && take_b {
                    c = ca[p];
                    v += a * va[p] + b * vb[q];
                    p += 1;
                    q += 1;
                } else if take_a {
                    c = ca[p];
                    v += a * va[p];
                    p += 1;
                } else {
                    c = cb[q];
                    v += b * vb[q];
                    q += 1;
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// `self · diag(d)`
    pub fn scale_columns(&self, d: &[f64]) -> Result<Self> {
        self.check_vec(d, self.ncols, "scale_columns")?;
        let mut out = self.clone();
        for (v, &c) in out.values.iter_mut().zip(&out.col_idx) {
            *v *= d[c];
        }
        Ok(out)
    }

    /// Main diagonal (zero where not stored).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Rows `rows` and columns `cols` of `self`, renumbered in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        let mut map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            if old >= self.ncols {
                return Err(Error::Structure(format!("column {old} out of range")));
            }
            map[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_r, &r) in rows.iter().enumerate() {
            if r >= self.nrows {
                return Err(Error::Structure(format!("row {r} out of range")));
            }
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                if map[c] != usize::MAX {
                    triplets.push((new_r, map[c], v));
                }
            }
        }
        Self::from_triplets(&triplets, rows.len(), cols.len())
    }

    /// Reverse Cuthill-McKee ordering of the (structurally symmetric)
    /// pattern; `perm[new] = old`. Each component starts from a vertex of
    /// minimum degree.
    pub fn reverse_cuthill_mckee(&self) -> Vec<usize> {
        let n = self.nrows;
        let degree: Vec<usize> = (0..n).map(|i| self.row(i).0.len()).collect();
        let mut starts: Vec<usize> = (0..n).collect();
        starts.sort_by_key(|&i| degree[i]);
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::new();
        let mut next = Vec::new();
        for s in starts {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                next.clear();
                next.extend(self.row(v).0.iter().copied().filter(|&j| j < n && !seen[j]));
                next.sort_by_key(|&j| degree[j]);
                for &j in &next {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        order.reverse();
        order
    }

    /// Drops stored entries with `|v| <= tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (cs, vs) = self.row(i);
            for (&c, &v) in cs.iter().zip(vs) {
                if v.abs() > tol {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// `max |a_ij − a_ji|`, or infinity for a non-square matrix.
    pub fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let t = self.transpose();
        match self.add_scaled(1.0, &t, -1.0) {
            Ok(d) => d.max_abs(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Symmetric to `tol` relative to the largest entry.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.symmetry_defect() <= rel_tol * self.max_abs().max(f64::MIN_POSITIVE)
    }
}
