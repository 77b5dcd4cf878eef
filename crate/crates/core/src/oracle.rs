//! Dense brute-force references for small systems: the full saddle-point
//! matrix, complete generalized spectra, and the spectral bound for the
//! shared preconditioner.

use crate::constrained::{ConstrainedSystem, HarmonicBasis};
use crate::dense::{generalized_symmetric_eigen, DenseMatrix, PivotedQr, SymmetricEigen};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::vector;
use alloc::vec;
use alloc::vec::Vec;

pub const KKT_CAP: usize = 5000;
pub const EIG_CAP: usize = 3000;
/// Rank decisions: pivots below this fraction of the largest are zero.
pub const RANK_TOL: f64 = 1e-10;

fn cap(size: usize, cap: usize) -> Result<()> {
    if size > cap {
        Err(Error::SizeCap { size, cap })
    } else {
        Ok(())
    }
}

pub fn to_dense(a: &CsrMatrix) -> DenseMatrix {
    DenseMatrix::from_csr(a)
}

/// Dense `B U Bᵀ`.
pub fn dense_bub(sys: &ConstrainedSystem) -> Result<DenseMatrix> {
    Ok(to_dense(&sys.bub_matrix()?))
}

/// Dense `M H Hᵀ M`.
pub fn dense_low_rank(sys: &ConstrainedSystem, h: &HarmonicBasis) -> Result<DenseMatrix> {
    let n = sys.n();
    let mh: Vec<Vec<f64>> = h
        .columns
        .iter()
        .map(|c| sys.m.spmv(c))
        .collect::<Result<_>>()?;
    let mut out = DenseMatrix::zeros(n, n);
    for v in &mh {
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += v[i] * v[j];
            }
        }
    }
    Ok(out)
}

/// The block matrix `[[A + cM, B], [Bᵀ, 0]]`.
pub fn kkt_matrix(sys: &ConstrainedSystem) -> Result<DenseMatrix> {
    let n = sys.n();
    let m = sys.n_constraints();
    cap(n + m, KKT_CAP)?;
    let mut k = DenseMatrix::zeros(n + m, n + m);
    for (i, j, v) in sys.a.to_triplets() {
        k[(i, j)] += v;
    }
    for (i, j, v) in sys.m.to_triplets() {
        k[(i, j)] += sys.c * v;
    }
    for (i, j, v) in sys.b.to_triplets() {
        k[(i, n + j)] += v;
        k[(n + j, i)] += v;
    }
    Ok(k)
}

/// Minimum-norm least-squares solution `(u, p)` of the full saddle-point
/// system by pivoted QR with rank detection. Exact when the block matrix is
/// invertible.
pub fn dense_kkt_solve(sys: &ConstrainedSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    let (u, p, _) = dense_kkt_solve_ranked(sys)?;
    Ok((u, p))
}

/// [`dense_kkt_solve`] that also returns the numerical rank of the block
/// matrix; the solution is unique iff the rank equals `N + M`.
pub fn dense_kkt_solve_ranked(sys: &ConstrainedSystem) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let n = sys.n();
    let k = kkt_matrix(sys)?;
    let mut rhs = sys.f.clone();
    rhs.extend_from_slice(&sys.g);
    let qr = PivotedQr::new(&k);
    let rank = qr.rank(RANK_TOL);
    let x = qr.solve_min_norm(&rhs, RANK_TOL);
    let p = x[n..].to_vec();
    let mut u = x;
    u.truncate(n);
    Ok((u, p, rank))
}

/// Relative residual of `(u, p)` in the full block system.
pub fn kkt_residual(sys: &ConstrainedSystem, u: &[f64], p: &[f64]) -> Result<f64> {
    let mut r1 = vector::sub(&sys.f, &sys.b.spmv(p)?);
    vector::axpy(-1.0, &sys.a.spmv(u)?, &mut r1);
    vector::axpy(-sys.c, &sys.m.spmv(u)?, &mut r1);
    let r2 = vector::sub(&sys.g, &sys.b.spmv_t(u)?);
    let num = libm::sqrt(vector::dot(&r1, &r1) + vector::dot(&r2, &r2));
    let den = libm::sqrt(vector::dot(&sys.f, &sys.f) + vector::dot(&sys.g, &sys.g));
    Ok(if den > 0.0 { num / den } else { num })
}

/// Full spectrum of `A x = λ M x`, ascending, with M-orthonormal vectors.
pub fn dense_generalized_eigs(a: &DenseMatrix, m: &DenseMatrix) -> Result<SymmetricEigen> {
    cap(a.nrows(), EIG_CAP)?;
    generalized_symmetric_eigen(a, m)
}

/// Spectrum of `(A + BUBᵀ) x = λ M x`.
pub fn augmented_spectrum(sys: &ConstrainedSystem) -> Result<SymmetricEigen> {
    cap(sys.n(), EIG_CAP)?;
    let k = to_dense(&sys.a).add_scaled(1.0, &dense_bub(sys)?, 1.0)?;
    dense_generalized_eigs(&k, &to_dense(&sys.m))
}

/// Number of eigenvalues of `(A + BUBᵀ, M)` at most `rel · λ_max`.
pub fn dense_dim_c0(sys: &ConstrainedSystem, rel: f64) -> Result<usize> {
    let e = augmented_spectrum(sys)?;
    let top = e.values.last().copied().unwrap_or(0.0);
    Ok(e.values.iter().filter(|&&l| l <= rel * top).count())
}

/// Outcome of the spectral containment test.
#[derive(Debug, Clone)]
pub struct Containment {
    pub violations: usize,
    /// Smallest nonzero eigenvalue of `(A + BUBᵀ) x = λ M x`.
    pub lambda_min: f64,
    /// Spectrum of `P⁻¹Q`, ascending.
    pub spectrum: Vec<f64>,
    pub lower_bound: f64,
}

/// Eigenvalues of `(A + BUBᵀ + M)⁻¹ (A + BUBᵀ + MHHᵀM)` against the interval
/// `[1 − 1/(1 + λ_min), 1]`, widened by `tol` on both sides.
pub fn spectrum_containment_check(
    sys: &ConstrainedSystem,
    h: &HarmonicBasis,
    tol: f64,
) -> Result<Containment> {
    if h.dim == 0 {
        return Err(Error::Config(
            "containment check needs a nonempty harmonic basis".into(),
        ));
    }
    let n = sys.n();
    cap(n, EIG_CAP)?;
    let m = to_dense(&sys.m);
    let k = to_dense(&sys.a).add_scaled(1.0, &dense_bub(sys)?, 1.0)?;
    let base = generalized_symmetric_eigen(&k, &m)?;
    let lambda_min = base.values.get(h.dim).copied().ok_or_else(|| {
        Error::Config("harmonic basis spans the whole space".into())
    })?;
    let p = k.add_scaled(1.0, &m, 1.0)?;
    let q = k.add_scaled(1.0, &dense_low_rank(sys, h)?, 1.0)?;
    let spectrum = generalized_symmetric_eigen(&q, &p)?.values;
    let lower_bound = 1.0 - 1.0 / (1.0 + lambda_min);
    let violations = spectrum
        .iter()
        .filter(|&&l| l < lower_bound - tol || l > 1.0 + tol)
        .count();
    Ok(Containment {
        violations,
        lambda_min,
        spectrum,
        lower_bound,
    })
}

/// Dense solve of the penalty system `(A + cM + εBBᵀ) u = F + εBG` by
/// pivoted QR, so that the loss of accuracy for large `ε` is visible rather
/// than hidden behind a solver failure.
pub fn dense_penalty_solve(sys: &ConstrainedSystem, epsilon: f64) -> Result<Vec<f64>> {
    cap(sys.n(), KKT_CAP)?;
    let (_, matrix) = crate::constrained::penalty_operator(sys, epsilon)?;
    let mut rhs = sys.f.clone();
    vector::axpy(epsilon, &sys.b.spmv(&sys.g)?, &mut rhs);
    Ok(PivotedQr::new(&to_dense(&matrix)).solve_min_norm(&rhs, 0.0))
}

/// Numerical rank by pivoted QR.
pub fn rank(a: &DenseMatrix) -> usize {
    PivotedQr::new(a).rank(RANK_TOL)
}

/// Dimension bookkeeping of the M-orthogonal decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecompositionRanks {
    pub n: usize,
    pub rank_a: usize,
    pub rank_bt: usize,
    pub rank_bub: usize,
    pub dim_c0: usize,
}

impl DecompositionRanks {
    /// `Ker Bᵀ = Ker BUBᵀ` and `N = dim C₀ + rank A + rank BUBᵀ`.
    pub fn consistent(&self) -> bool {
        self.rank_bt == self.rank_bub && self.dim_c0 + self.rank_a + self.rank_bub == self.n
    }
}

pub fn decomposition_ranks(sys: &ConstrainedSystem) -> Result<DecompositionRanks> {
    cap(sys.n(), EIG_CAP)?;
    Ok(DecompositionRanks {
        n: sys.n(),
        rank_a: rank(&to_dense(&sys.a)),
        rank_bt: rank(&to_dense(&sys.b.transpose())),
        rank_bub: rank(&dense_bub(sys)?),
        dim_c0: dense_dim_c0(sys, 1e-10)?,
    })
}

/// Compares the mixed Hodge–Laplacian solve `[[A + cM, B], [−Bᵀ, Mₚ]]` with
/// the reduced equation `(A + B Mₚ⁻¹ Bᵀ + cM) u = F`, i.e. the choice
/// `U = Mₚ⁻¹`. Returns the relative difference of the two `u`.
pub fn hodge_laplacian_check(sys: &ConstrainedSystem, mass_p: &CsrMatrix) -> Result<f64> {
    let n = sys.n();
    let m = sys.n_constraints();
    cap(n + m, KKT_CAP)?;
    if mass_p.shape() != (m, m) {
        return Err(Error::Dimension("multiplier mass has the wrong size".into()));
    }
    let mut k = DenseMatrix::zeros(n + m, n + m);
    for (i, j, v) in sys.a.to_triplets() {
        k[(i, j)] += v;
    }
    for (i, j, v) in sys.m.to_triplets() {
        k[(i, j)] += sys.c * v;
    }
    for (i, j, v) in sys.b.to_triplets() {
        k[(i, n + j)] += v;
        k[(n + j, i)] -= v;
    }
    for (i, j, v) in mass_p.to_triplets() {
        k[(n + i, n + j)] += v;
    }
    let mut rhs = sys.f.clone();
    rhs.extend(vec![0.0; m]);
    let mixed = PivotedQr::new(&k).solve_min_norm(&rhs, RANK_TOL);

    // reduced: columns of Mₚ⁻¹ Bᵀ by Cholesky
    let mp = to_dense(mass_p);
    let l = mp.cholesky()?;
    let bt = to_dense(&sys.b.transpose());
    let mut reduced = to_dense(&sys.a).add_scaled(1.0, &to_dense(&sys.m), sys.c)?;
    let bd = to_dense(&sys.b);
    let mut y = DenseMatrix::zeros(m, n);
    for j in 0..n {
        let col = l.solve_lower_transpose(&l.solve_lower(&bt.column(j)));
        for i in 0..m {
            y[(i, j)] = col[i];
        }
    }
    reduced = reduced.add_scaled(1.0, &bd.matmul(&y)?, 1.0)?;
    let u = PivotedQr::new(&reduced).solve_min_norm(&sys.f, RANK_TOL);
    Ok(vector::rel_diff(&mixed[..n], &u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Weight;

    #[test]
    fn kkt_without_constraint_coupling() {
        let sys = ConstrainedSystem::new(
            CsrMatrix::identity(3),
            CsrMatrix::zeros(3, 2),
            CsrMatrix::identity(3),
            Weight::Scalar(1.0),
            0.0,
            vec![1.0, 2.0, 3.0],
            vec![0.0, 0.0],
        )
        .unwrap();
        let (u, p, rank) = dense_kkt_solve_ranked(&sys).unwrap();
        assert!(vector::rel_diff(&u, &[1.0, 2.0, 3.0]) < 1e-14);
        assert!(p.iter().all(|v| v.abs() < 1e-14));
        assert_eq!(rank, 3);
    }

    #[test]
    fn small_pencils() {
        let mut a = DenseMatrix::zeros(2, 2);
        a[(0, 0)] = 2.0;
        a[(1, 1)] = 1.0;
        let e = dense_generalized_eigs(&a, &DenseMatrix::identity(2)).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15 && (e.values[1] - 2.0).abs() < 1e-15);
        let e = dense_generalized_eigs(&a, &a).unwrap();
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn size_cap_is_enforced() {
        let big = DenseMatrix::zeros(EIG_CAP + 1, EIG_CAP + 1);
        assert!(matches!(
            dense_generalized_eigs(&big, &big),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn containment_rejects_empty_basis() {
        let sys = ConstrainedSystem::new(
            CsrMatrix::identity(2),
            CsrMatrix::zeros(2, 1),
            CsrMatrix::identity(2),
            Weight::Scalar(1.0),
            1.0,
            vec![1.0; 2],
            vec![0.0],
        )
        .unwrap();
        assert!(spectrum_containment_check(&sys, &HarmonicBasis::empty(), 1e-8).is_err());
    }
}
