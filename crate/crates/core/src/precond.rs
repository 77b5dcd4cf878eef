//! Preconditioners: identity, Jacobi and zero-fill incomplete LU.

use crate::error::{Error, Result};
use crate::operator::Weight;
use crate::sparse::CsrMatrix;
use crate::vector;
use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Approximate inverse applied to residual vectors.
pub trait Preconditioner: Send + Sync {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
}

/// Inverse of the diagonal.
#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let d = a.diagonal();
        if let Some(i) = d.iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::PivotBreakdown { row: i });
        }
        Ok(Self {
            inv_diag: d.iter().map(|v| 1.0 / v).collect(),
        })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        vector::check_len(r, self.inv_diag.len(), "jacobi apply")?;
        Ok(r.iter().zip(&self.inv_diag).map(|(a, b)| a * b).collect())
    }
}

/// `L · Ut ≈ A` on the sparsity pattern of `A`; `L` is unit lower triangular
/// (unit diagonal stored) and `Ut` upper triangular.
#[derive(Debug, Clone)]
pub struct Ilu0Factors {
    l: CsrMatrix,
    ut: CsrMatrix,
}

impl Ilu0Factors {
    pub fn l(&self) -> &CsrMatrix {
        &self.l
    }

    pub fn ut(&self) -> &CsrMatrix {
        &self.ut
    }

    /// Smallest diagonal entry of `Ut`. For a symmetric input the factors
    /// define a positive definite preconditioner iff this is positive.
    pub fn min_pivot(&self) -> f64 {
        self.ut.diagonal().into_iter().fold(f64::INFINITY, f64::min)
    }
}

impl Preconditioner for Ilu0Factors {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        ilu0_apply(self, r)
    }
}

/// Incomplete LU factorization with no fill outside the pattern of `a`.
pub fn ilu0_factorize(a: &CsrMatrix) -> Result<Ilu0Factors> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "ILU(0) needs a square matrix, got {}x{n}",
            a.ncols()
        )));
    }
    let rp = a.row_ptr();
    let ci = a.col_idx();
    let mut lu = a.values().to_vec();
    let mut diag = vec![usize::MAX; n];
    for i in 0..n {
        if let Some(k) = (rp[i]..rp[i + 1]).find(|&k| ci[k] == i) {
            diag[i] = k;
        }
    }
    // marker[j] = position of column j in the current row
    let mut marker = vec![usize::MAX; n];
    for i in 0..n {
        if diag[i] == usize::MAX {
            return Err(Error::PivotBreakdown { row: i });
        }
        for k in rp[i]..rp[i + 1] {
            marker[ci[k]] = k;
        }
        for kk in rp[i]..diag[i] {
            let k = ci[kk];
            let pivot = lu[diag[k]];
            lu[kk] /= pivot;
            let lik = lu[kk];
            for jj in (diag[k] + 1)..rp[k + 1] {
                let pos = marker[ci[jj]];
                if pos != usize::MAX {
                    lu[pos] -= lik * lu[jj];
                }
            }
        }
        let d = lu[diag[i]];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::PivotBreakdown { row: i });
        }
        for k in rp[i]..rp[i + 1] {
            marker[ci[k]] = usize::MAX;
        }
    }

    let mut l_ptr = vec![0];
    let mut l_idx = Vec::new();
    let mut l_val = Vec::new();
    let mut u_ptr = vec![0];
    let mut u_idx = Vec::new();
    let mut u_val = Vec::new();
    for i in 0..n {
        for k in rp[i]..diag[i] {
            l_idx.push(ci[k]);
            l_val.push(lu[k]);
        }
        l_idx.push(i);
        l_val.push(1.0);
        for k in diag[i]..rp[i + 1] {
            u_idx.push(ci[k]);
            u_val.push(lu[k]);
        }
        l_ptr.push(l_idx.len());
        u_ptr.push(u_idx.len());
    }
    Ok(Ilu0Factors {
        l: CsrMatrix::new(n, n, l_ptr, l_idx, l_val)?,
        ut: CsrMatrix::new(n, n, u_ptr, u_idx, u_val)?,
    })
}

/// `Ut⁻¹ (L⁻¹ r)` by forward then backward substitution.
pub fn ilu0_apply(f: &Ilu0Factors, r: &[f64]) -> Result<Vec<f64>> {
    let n = f.l.nrows();
    vector::check_len(r, n, "ILU(0) apply")?;
    let mut y = r.to_vec();
    for i in 0..n {
        let (cols, vals) = f.l.row(i);
        let mut s = y[i];
        for (&j, &v) in cols.iter().zip(vals) {
            if j < i {
                s -= v * y[j];
            }
        }
        y[i] = s;
    }
    for i in (0..n).rev() {
        let (cols, vals) = f.ut.row(i);
        let mut s = y[i];
        let mut d = 1.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j > i {
                s -= v * y[j];
            } else {
                d = v;
            }
        }
        y[i] = s / d;
    }
    Ok(y)
}

/// ILU(0) of `P A Pᵀ` for a reverse Cuthill-McKee permutation `P`, applied
/// in the original numbering.
#[derive(Debug, Clone)]
pub struct ReorderedIlu0 {
    perm: Vec<usize>,
    factors: Ilu0Factors,
}

impl ReorderedIlu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let perm = a.reverse_cuthill_mckee();
        let factors = ilu0_factorize(&a.submatrix(&perm, &perm)?)?;
        Ok(Self { perm, factors })
    }

    /// `perm[new] = old`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn factors(&self) -> &Ilu0Factors {
        &self.factors
    }
}

impl Preconditioner for ReorderedIlu0 {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        vector::check_len(r, self.perm.len(), "ILU(0) apply")?;
        let rp: Vec<f64> = self.perm.iter().map(|&i| r[i]).collect();
        let z = ilu0_apply(&self.factors, &rp)?;
        let mut out = vec![0.0; r.len()];
        for (&old, v) in self.perm.iter().zip(z) {
            out[old] = v;
        }
        Ok(out)
    }
}

/// ILU(0) of the explicitly assembled `A + B U Bᵀ + M`, used for every
/// operator of the form `A + B U Bᵀ + (c M | M H Hᵀ M)`.
pub fn build_augmented_preconditioner(
    a: &CsrMatrix,
    b: &CsrMatrix,
    u: &Weight,
    m: &CsrMatrix,
) -> Result<Ilu0Factors> {
    ilu0_factorize(&augmented_matrix(a, b, u, m, 1.0, 1.0)?)
}

/// `A + β B U Bᵀ + γ M` assembled as a sparse matrix.
pub fn augmented_matrix(
    a: &CsrMatrix,
    b: &CsrMatrix,
    u: &Weight,
    m: &CsrMatrix,
    beta: f64,
    gamma: f64,
) -> Result<CsrMatrix> {
    let mut s = a.add_scaled(1.0, m, gamma)?;
    if beta != 0.0 {
        s = s.add_scaled(1.0, &u.sandwich(b)?, beta)?;
    }
    Ok(s)
}

fn positive(pivot: f64) -> Result<()> {
    if pivot > 0.0 {
        Ok(())
    } else {
        Err(Error::PivotBreakdown { row: usize::MAX })
    }
}

/// Which preconditioner to build for a sparse operator.
///
/// The ILU variants fall back to Jacobi when the incomplete factorization
/// breaks down or has a nonpositive pivot, since PCG needs a positive
/// definite preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrecondKind {
    Identity,
    Jacobi,
    /// ILU(0) after reverse Cuthill-McKee reordering.
    #[default]
    Ilu0,
    /// ILU(0) in the assembly numbering.
    Ilu0Natural,
}

impl PrecondKind {
    pub fn build(self, a: &CsrMatrix) -> Result<Box<dyn Preconditioner>> {
        Ok(self.build_reporting(a)?.0)
    }

    /// Like [`build`](Self::build), also reporting whether an ILU variant
    /// fell back to Jacobi.
    pub fn build_reporting(self, a: &CsrMatrix) -> Result<(Box<dyn Preconditioner>, bool)> {
        let ilu: Result<Box<dyn Preconditioner>> = match self {
            PrecondKind::Identity => return Ok((Box::new(Identity), false)),
            PrecondKind::Jacobi => return Ok((Box::new(Jacobi::new(a)?), false)),
            PrecondKind::Ilu0 => ReorderedIlu0::new(a).and_then(|f| {
                positive(f.factors.min_pivot())?;
                Ok(Box::new(f) as Box<dyn Preconditioner>)
            }),
            PrecondKind::Ilu0Natural => ilu0_factorize(a).and_then(|f| {
                positive(f.min_pivot())?;
                Ok(Box::new(f) as Box<dyn Preconditioner>)
            }),
        };
        match ilu {
            Ok(pc) => Ok((pc, false)),
            Err(Error::PivotBreakdown { .. }) => Ok((Box::new(Jacobi::new(a)?), true)),
            Err(e) => Err(e),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PrecondKind::Identity => "none",
            PrecondKind::Jacobi => "jacobi",
            PrecondKind::Ilu0 => "ilu0",
            PrecondKind::Ilu0Natural => "ilu0-natural",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" | "identity" => Some(PrecondKind::Identity),
            "jacobi" => Some(PrecondKind::Jacobi),
            "ilu0" | "ilu" => Some(PrecondKind::Ilu0),
            "ilu0-natural" => Some(PrecondKind::Ilu0Natural),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::rng;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(&t, n, n).unwrap()
    }

    fn product_error(a: &CsrMatrix, f: &Ilu0Factors) -> f64 {
        let lu = f.l().matmul(f.ut()).unwrap();
        DenseMatrix::from_csr(&lu)
            .add_scaled(1.0, &DenseMatrix::from_csr(a), -1.0)
            .unwrap()
            .max_abs()
    }

    #[test]
    fn tridiagonal_is_factored_exactly() {
        let a = tridiag(5);
        let f = ilu0_factorize(&a).unwrap();
        assert!(product_error(&a, &f) <= 1e-13);
    }

    #[test]
    fn exact_lu_reproduces_dense_solve() {
        // arrow-free pattern closed under the product: lower bidiagonal times upper bidiagonal
        let l = CsrMatrix::from_triplets(
            &[(0, 0, 1.0), (1, 0, 0.5), (1, 1, 1.0), (2, 1, -0.25), (2, 2, 1.0)],
            3,
            3,
        )
        .unwrap();
        let u = CsrMatrix::from_triplets(
            &[(0, 0, 4.0), (0, 1, 1.0), (1, 1, 3.0), (1, 2, 2.0), (2, 2, 5.0)],
            3,
            3,
        )
        .unwrap();
        let a = l.matmul(&u).unwrap();
        let f = ilu0_factorize(&a).unwrap();
        assert!(product_error(&a, &f) <= 1e-13);
        let r = [1.0, 2.0, 3.0];
        let x = ilu0_apply(&f, &r).unwrap();
        let d = DenseMatrix::from_csr(&a);
        let back = d.matvec(&x).unwrap();
        assert!(vector::rel_diff(&back, &r) <= 1e-12);
    }

    #[test]
    fn identity_factors_are_identity() {
        let f = ilu0_factorize(&CsrMatrix::identity(4)).unwrap();
        assert_eq!(ilu0_apply(&f, &[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn zero_pivot_names_row() {
        let a = CsrMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)], 2, 2)
            .unwrap();
        assert_eq!(ilu0_factorize(&a).unwrap_err(), Error::PivotBreakdown { row: 1 });
        let missing = CsrMatrix::from_triplets(&[(0, 0, 1.0), (1, 0, 1.0)], 2, 2).unwrap();
        assert_eq!(ilu0_factorize(&missing).unwrap_err(), Error::PivotBreakdown { row: 1 });
    }

    #[test]
    fn pattern_is_preserved_and_defining_property_holds() {
        // 2D five-point Laplacian on a 6x6 grid, where ILU(0) drops fill
        let g = 6;
        let idx = |i: usize, j: usize| i * g + j;
        let mut t = Vec::new();
        for i in 0..g {
            for j in 0..g {
                t.push((idx(i, j), idx(i, j), 4.0));
                if i + 1 < g {
                    t.push((idx(i, j), idx(i + 1, j), -1.0));
                    t.push((idx(i + 1, j), idx(i, j), -1.0));
                }
                if j + 1 < g {
                    t.push((idx(i, j), idx(i, j + 1), -1.0));
                    t.push((idx(i, j + 1), idx(i, j), -1.0));
                }
            }
        }
        let a = CsrMatrix::from_triplets(&t, g * g, g * g).unwrap();
        let f = ilu0_factorize(&a).unwrap();
        for (i, j, _) in f.l().to_triplets().into_iter().chain(f.ut().to_triplets()) {
            assert!(i == j || a.get(i, j) != 0.0);
        }
        let lu = f.l().matmul(f.ut()).unwrap();
        for (i, j, v) in a.to_triplets() {
            assert!((lu.get(i, j) - v).abs() <= 1e-13);
        }
    }

    #[test]
    fn ilu_narrows_spectrum_on_random_spd() {
        // random sparse SPD: tridiagonal plus random symmetric couplings, diagonally dominant
        let n = 40;
        let mut r = rng::seeded(17);
        let noise = rng::uniform_vec(&mut r, n);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.05 + 0.5 * noise[i].abs()));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
            if i + 7 < n {
                t.push((i, i + 7, 0.02 * noise[i]));
                t.push((i + 7, i, 0.02 * noise[i]));
            }
        }
        let a = CsrMatrix::from_triplets(&t, n, n).unwrap();
        let f = ilu0_factorize(&a).unwrap();
        let d = DenseMatrix::from_csr(&a);
        // dense spectra of A and of the symmetrized preconditioned operator
        let ea = crate::dense::symmetric_eigen(&d).unwrap().values;
        let mut pa = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let col = ilu0_apply(&f, &d.column(j)).unwrap();
            for i in 0..n {
                pa[(i, j)] = col[i];
            }
        }
        let spread_a = ea[n - 1] / ea[0];
        // eigenvalues of P⁻¹A are real; estimate extremes by power iteration
        let extreme = |m: &DenseMatrix, shift: f64| {
            let mut v = vec![1.0; n];
            let mut lam = 0.0;
            for _ in 0..2000 {
                let mut w = m.matvec(&v).unwrap();
                vector::axpy(-shift, &v, &mut w);
                lam = vector::dot(&v, &w) / vector::dot(&v, &v);
                let nw = vector::norm2(&w);
                v = w.iter().map(|x| x / nw).collect();
            }
            lam + shift
        };
        let hi = extreme(&pa, 0.0);
        let lo = extreme(&pa, hi);
        assert!(hi / lo < spread_a);
    }

    #[test]
    fn augmented_with_zero_coupling_is_a_plus_m() {
        let a = tridiag(4);
        let m = CsrMatrix::identity(4);
        let b = CsrMatrix::zeros(4, 2);
        let s = augmented_matrix(&a, &b, &Weight::Scalar(3.0), &m, 1.0, 1.0).unwrap();
        let want = a.add_scaled(1.0, &m, 1.0).unwrap();
        for (i, j, v) in want.to_triplets() {
            assert_eq!(s.get(i, j), v);
        }
        assert!(build_augmented_preconditioner(&a, &b, &Weight::Scalar(3.0), &m).is_ok());
    }

    #[test]
    fn reordered_ilu_inverts_shuffled_tridiagonal() {
        let n = 9;
        let shuffle: Vec<usize> = (0..n).map(|i| (i * 4) % n).collect();
        let a = tridiag(n).submatrix(&shuffle, &shuffle).unwrap();
        let pc = ReorderedIlu0::new(&a).unwrap();
        let mut seen = pc.permutation().to_vec();
        seen.sort_unstable();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 3.5).collect();
        let y = pc.apply(&a.spmv(&x).unwrap()).unwrap();
        assert!(vector::rel_diff(&y, &x) < 1e-13);
    }

    #[test]
    fn indefinite_input_falls_back_to_jacobi() {
        let a = CsrMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)], 2, 2)
            .unwrap();
        let (_, fell_back) = PrecondKind::Ilu0.build_reporting(&a).unwrap();
        assert!(fell_back);
        let (_, fell_back) = PrecondKind::Ilu0.build_reporting(&tridiag(5)).unwrap();
        assert!(!fell_back);
    }
}
