//! Small dense linear algebra: Cholesky, symmetric eigendecomposition
//! (Householder tridiagonalization followed by implicit QL) and Householder
//! QR with column pivoting.
//!
//! Used for Rayleigh–Ritz projections inside the block eigensolver and by the
//! brute-force reference in [`crate::oracle`].

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::Dimension(format!(
                "{} entries for a {nrows}x{ncols} matrix",
                data.len()
            )));
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn from_csr(a: &CsrMatrix) -> Self {
        let mut m = Self::zeros(a.nrows(), a.ncols());
        for (i, j, v) in a.to_triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// Matrix whose columns are `cols` (all of equal length).
    pub fn from_columns(nrows: usize, cols: &[Vec<f64>]) -> Self {
        let mut m = Self::zeros(nrows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for i in 0..nrows {
                m[(i, j)] = c[i];
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<Self> {
        if self.ncols != rhs.nrows {
            return Err(Error::Dimension(format!(
                "dense matmul {}x{} · {}x{}",
                self.nrows, self.ncols, rhs.nrows, rhs.ncols
            )));
        }
        let mut out = Self::zeros(self.nrows, rhs.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = &rhs.data[k * rhs.ncols..(k + 1) * rhs.ncols];
                let dst = &mut out.data[i * rhs.ncols..(i + 1) * rhs.ncols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::Dimension(format!(
                "dense matvec {}x{} · {}",
                self.nrows,
                self.ncols,
                x.len()
            )));
        }
        Ok((0..self.nrows)
            .map(|i| {
                self.data[i * self.ncols..(i + 1) * self.ncols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// `a · self + b · other`
    pub fn add_scaled(&self, a: f64, other: &DenseMatrix, b: f64) -> Result<Self> {
        if (self.nrows, self.ncols) != (other.nrows, other.ncols) {
            return Err(Error::Dimension("dense add shape mismatch".into()));
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Replaces the matrix by `(self + selfᵀ)/2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.nrows {
            for j in (i + 1)..self.ncols {
                let s = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = s;
                self[(j, i)] = s;
            }
        }
    }

    /// Lower Cholesky factor `L` with `self = L Lᵀ`.
    pub fn cholesky(&self) -> Result<Self> {
        let n = self.nrows;
        if n != self.ncols {
            return Err(Error::Dimension("cholesky of a non-square matrix".into()));
        }
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite(format!(
                    "cholesky pivot {d:e} at column {j}"
                )));
            }
            let d = libm::sqrt(d);
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Solves `L x = b` for lower-triangular `self`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.nrows;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self[(i, k)] * x[k];
            }
            x[i] = s / self[(i, i)];
        }
        x
    }

    /// Solves `Lᵀ x = b` for lower-triangular `self`.
    pub fn solve_lower_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.nrows;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self[(k, i)] * x[k];
            }
            x[i] = s / self[(i, i)];
        }
        x
    }

    /// Solves `self x = b` for SPD `self` by Cholesky.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        let l = self.cholesky()?;
        Ok(l.solve_lower_transpose(&l.solve_lower(b)))
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

/// Full eigendecomposition of a symmetric matrix.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("eigendecomposition of a non-square matrix".into()));
    }
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: DenseMatrix::zeros(0, 0),
        });
    }
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("symmetric eigensolver input"));
    }
    let mut v = a.clone();
    v.symmetrize();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, new)] = v[(r, old)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Generalized problem `A x = λ M x` for symmetric `A` and SPD `M`; the
/// eigenvectors are M-orthonormal.
pub fn generalized_symmetric_eigen(a: &DenseMatrix, m: &DenseMatrix) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if a.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension("generalized eigenproblem shape mismatch".into()));
    }
    let l = m.cholesky()?;
    // C = L⁻¹ A L⁻ᵀ, built column by column
    let mut y = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = l.solve_lower(&a.column(j));
        for i in 0..n {
            y[(i, j)] = col[i];
        }
    }
    let yt = y.transpose();
    let mut c = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = l.solve_lower(&yt.column(j));
        for i in 0..n {
            c[(i, j)] = col[i];
        }
    }
    let eig = symmetric_eigen(&c)?;
    let mut vectors = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = l.solve_lower_transpose(&eig.vectors.column(j));
        for i in 0..n {
            vectors[(i, j)] = col[i];
        }
    }
    Ok(SymmetricEigen {
        values: eig.values,
        vectors,
    })
}

// Householder reduction to tridiagonal form (EISPACK tred2 ordering).
fn tred2(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL iterations on the tridiagonal matrix (EISPACK tql2).
fn tql2(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Unsupported(
                        "tridiagonal QL iteration did not converge".into(),
                    ));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Householder QR with column pivoting, `A P = Q R`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// `R` in the upper triangle, Householder vectors below it.
    qr: DenseMatrix,
    tau: Vec<f64>,
    /// `perm[k]` is the original column placed at position `k`.
    pub perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(a: &DenseMatrix) -> Self {
        let (m, n) = (a.nrows(), a.ncols());
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let kmax = m.min(n);
        let mut tau = vec![0.0; kmax];
        for k in 0..kmax {
            // pivot: largest remaining column norm
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..n {
                let s: f64 = (k..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum();
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            if best != k {
                for i in 0..m {
                    let t = qr[(i, k)];
                    qr[(i, k)] = qr[(i, best)];
                    qr[(i, best)] = t;
                }
                perm.swap(k, best);
            }
            tau[k] = householder_column(&mut qr, k, k);
            apply_reflector_left(&mut qr, k, k, tau[k], k + 1..n);
        }
        Self { qr, tau, perm }
    }

    /// Diagonal of `R`.
    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.tau.len()).map(|k| self.qr[(k, k)]).collect()
    }

    /// Numerical rank: pivots with `|r_kk| > rel_tol · |r_00|`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let diag = self.r_diagonal();
        let Some(first) = diag.first().map(|v| v.abs()) else {
            return 0;
        };
        if first == 0.0 {
            return 0;
        }
        diag.iter().take_while(|v| v.abs() > rel_tol * first).count()
    }

    /// `Qᵀ b`
    pub fn apply_qt(&self, b: &[f64]) -> Vec<f64> {
        let mut y = b.to_vec();
        for k in 0..self.tau.len() {
            apply_reflector_vec(&self.qr, k, k, self.tau[k], &mut y);
        }
        y
    }

    /// Minimum-norm least-squares solution of `A x ≈ b`, using the rank
    /// decided by `rel_tol` (complete orthogonal decomposition).
    pub fn solve_min_norm(&self, b: &[f64], rel_tol: f64) -> Vec<f64> {
        let n = self.qr.ncols();
        let r = self.rank(rel_tol);
        let mut x = vec![0.0; n];
        if r == 0 {
            return x;
        }
        let c = self.apply_qt(b);
        // Tᵀ = R[0..r, :]ᵀ (n × r), factor Tᵀ = Z S
        let mut tt = DenseMatrix::zeros(n, r);
        for i in 0..r {
            for j in i..n {
                tt[(j, i)] = self.qr[(i, j)];
            }
        }
        let mut ztau = vec![0.0; r];
        for k in 0..r {
            ztau[k] = householder_column(&mut tt, k, k);
            apply_reflector_left(&mut tt, k, k, ztau[k], k + 1..r);
        }
        // Sᵀ w = c[0..r], Sᵀ lower triangular
        let mut w = vec![0.0; n];
        for i in 0..r {
            let mut s = c[i];
            for k in 0..i {
                s -= tt[(k, i)] * w[k];
            }
            w[i] = s / tt[(i, i)];
        }
        // y = Z [w; 0]
        for k in (0..r).rev() {
            apply_reflector_vec(&tt, k, k, ztau[k], &mut w);
        }
        for (j, &p) in self.perm.iter().enumerate() {
            x[p] = w[j];
        }
        x
    }
}

// Builds the reflector zeroing column `col` below row `row`; stores v (with
// implicit unit head) below the diagonal and beta on it. Returns tau.
fn householder_column(a: &mut DenseMatrix, row: usize, col: usize) -> f64 {
    let m = a.nrows();
    let alpha = a[(row, col)];
    let sigma: f64 = ((row + 1)..m).map(|i| a[(i, col)] * a[(i, col)]).sum();
    if sigma == 0.0 {
        return 0.0;
    }
    let norm = libm::sqrt(alpha * alpha + sigma);
    let beta = if alpha <= 0.0 { norm } else { -norm };
    let v0 = alpha - beta;
    for i in (row + 1)..m {
        a[(i, col)] /= v0;
    }
    a[(row, col)] = beta;
    (beta - alpha) / beta
}

fn apply_reflector_left(
    a: &mut DenseMatrix,
    row: usize,
    col: usize,
    tau: f64,
    cols: core::ops::Range<usize>,
) {
    if tau == 0.0 {
        return;
    }
    let m = a.nrows();
    for j in cols {
        let mut s = a[(row, j)];
        for i in (row + 1)..m {
            s += a[(i, col)] * a[(i, j)];
        }
        s *= tau;
        a[(row, j)] -= s;
        for i in (row + 1)..m {
            let vi = a[(i, col)];
            a[(i, j)] -= s * vi;
        }
    }
}

fn apply_reflector_vec(a: &DenseMatrix, row: usize, col: usize, tau: f64, y: &mut [f64]) {
    if tau == 0.0 {
        return;
    }
    let m = a.nrows();
    let mut s = y[row];
    for i in (row + 1)..m {
        s += a[(i, col)] * y[i];
    }
    s *= tau;
    y[row] -= s;
    for i in (row + 1)..m {
        y[i] -= s * a[(i, col)];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random(n: usize, m: usize, seed: u64) -> DenseMatrix {
        let mut r = rng::seeded(seed);
        DenseMatrix::from_row_major(n, m, rng::uniform_vec(&mut r, n * m)).unwrap()
    }

    fn spd(n: usize, seed: u64) -> DenseMatrix {
        let a = random(n, n, seed);
        let mut s = a.matmul(&a.transpose()).unwrap();
        for i in 0..n {
            s[(i, i)] += n as f64;
        }
        s
    }

    #[test]
    fn diagonal_eigenvalues_sorted() {
        let mut a = DenseMatrix::zeros(2, 2);
        a[(0, 0)] = 2.0;
        a[(1, 1)] = 1.0;
        let e = generalized_symmetric_eigen(&a, &DenseMatrix::identity(2)).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15 && (e.values[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn pencil_with_itself_has_unit_spectrum() {
        let m = spd(6, 2);
        let e = generalized_symmetric_eigen(&m, &m).unwrap();
        for v in e.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_reconstructs_random_symmetric() {
        let mut a = random(12, 12, 9);
        a.symmetrize();
        let e = symmetric_eigen(&a).unwrap();
        let v = &e.vectors;
        for i in 0..12 {
            for j in 0..12 {
                let s: f64 = (0..12).map(|k| v[(i, k)] * e.values[k] * v[(j, k)]).sum();
                assert!((s - a[(i, j)]).abs() < 1e-12);
                let o: f64 = (0..12).map(|k| v[(k, i)] * v[(k, j)]).sum();
                assert!((o - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn generalized_vectors_are_m_orthonormal() {
        let mut a = random(8, 8, 4);
        a.symmetrize();
        let m = spd(8, 5);
        let e = generalized_symmetric_eigen(&a, &m).unwrap();
        let g = e.vectors.transpose().matmul(&m).unwrap().matmul(&e.vectors).unwrap();
        let r = a.matmul(&e.vectors).unwrap();
        let mv = m.matmul(&e.vectors).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!((g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                assert!((r[(i, j)] - e.values[j] * mv[(i, j)]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = DenseMatrix::identity(2);
        a[(1, 1)] = -1.0;
        assert!(matches!(a.cholesky(), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn qr_rank_and_min_norm_solution() {
        // rank-2 matrix of size 5x4: columns c2 = c0 + c1, c3 = 2 c0
        let base = random(5, 2, 11);
        let mut a = DenseMatrix::zeros(5, 4);
        for i in 0..5 {
            a[(i, 0)] = base[(i, 0)];
            a[(i, 1)] = base[(i, 1)];
            a[(i, 2)] = base[(i, 0)] + base[(i, 1)];
            a[(i, 3)] = 2.0 * base[(i, 0)];
        }
        let qr = PivotedQr::new(&a);
        assert_eq!(qr.rank(1e-10), 2);
        let b = [1.0, -1.0, 0.5, 2.0, 0.0];
        let x = qr.solve_min_norm(&b, 1e-10);
        // normal equations hold
        let ax = a.matvec(&x).unwrap();
        let res: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        let atr = a.transpose().matvec(&res).unwrap();
        assert!(atr.iter().all(|v| v.abs() < 1e-12));
        // x is orthogonal to the null space: (1,1,-1,0) and (2,0,0,-1)
        let n1 = x[0] + x[1] - x[2];
        let n2 = 2.0 * x[0] - x[3];
        assert!(n1.abs() < 1e-12 && n2.abs() < 1e-12);
    }

    #[test]
    fn qr_solves_square_system_exactly() {
        let a = spd(7, 21);
        let want = [1.0, 2.0, -1.0, 0.5, 0.0, 3.0, -2.0];
        let b = a.matvec(&want).unwrap();
        let x = PivotedQr::new(&a).solve_min_norm(&b, 1e-12);
        for i in 0..7 {
            assert!((x[i] - want[i]).abs() < 1e-12);
        }
        let y = a.solve_spd(&b).unwrap();
        for i in 0..7 {
            assert!((y[i] - want[i]).abs() < 1e-12);
        }
    }
}
