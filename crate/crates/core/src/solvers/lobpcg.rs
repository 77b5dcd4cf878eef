use super::{IterationTrace, LobpcgConfig};
use crate::dense::{generalized_symmetric_eigen, DenseMatrix};
use crate::error::{Error, Result};
use crate::operator::{m_orthonormalize, OperatorExpr};
use crate::precond::Preconditioner;
use crate::rng;
use crate::vector::{self, dot, norm2};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Smallest eigenpairs of `A x = λ M x` in ascending order; `vectors` are
/// M-orthonormal.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Per-pair `‖A x − λ M x‖ / ‖M x‖`.
    pub residuals: Vec<f64>,
    pub trace: IterationTrace,
    pub converged: bool,
}

const MAX_RESTARTS: usize = 3;
const DENSE_FALLBACK: usize = 64;
/// Extra block columns that shield the wanted pairs from a cluster split at
/// the block edge.
const GUARD: usize = 3;

/// Locally optimal block preconditioned conjugate gradient eigensolver.
///
/// A pair counts as converged when `‖A x − λ M x‖ / ‖M x‖ ≤ rel_tol · λ_hi`,
/// where `λ_hi` is the largest Ritz value met in any Rayleigh–Ritz step, a
/// lower estimate of the top of the spectrum. Converged pairs stay in the
/// block but stop contributing search directions (soft locking).
pub fn lobpcg(
    a: &OperatorExpr,
    m: &OperatorExpr,
    pc: &dyn Preconditioner,
    cfg: &LobpcgConfig,
) -> Result<EigenPairs> {
    let n = a.dim();
    if m.dim() != n {
        return Err(Error::Dimension(format!(
            "eigenproblem operators of size {n} and {}",
            m.dim()
        )));
    }
    let wanted = cfg.block_size;
    if wanted == 0 || wanted > n {
        return Err(Error::Config(format!(
            "block size {wanted} invalid for dimension {n}"
        )));
    }
    let k = (wanted + GUARD).min(n);
    if n <= DENSE_FALLBACK.max(5 * k) {
        return dense_pairs(a, m, wanted);
    }

    let mut rng = rng::seeded(cfg.seed);
    let mut x = fill_block(m, Vec::new(), k, &mut rng)?;
    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut restarts = 0;
    let mut lambda_hi: f64 = 0.0;
    let mut trace = IterationTrace::default();

    let (mut lambda, rr_x) = rayleigh_ritz(a, m, &x, k)?;
    x = rr_x;
    lambda_hi = lambda_hi.max(lambda.iter().copied().fold(0.0, f64::max));

    let mut converged = false;
    let mut residuals = vec![f64::INFINITY; k];
    for _ in 0..=cfg.max_iter {
        let ax: Vec<Vec<f64>> = x.iter().map(|v| a.apply(v)).collect::<Result<_>>()?;
        let mx: Vec<Vec<f64>> = x.iter().map(|v| m.apply(v)).collect::<Result<_>>()?;
        let mut r = Vec::with_capacity(k);
        for i in 0..k {
            let ri = vector::lincomb(1.0, &ax[i], -lambda[i], &mx[i]);
            residuals[i] = norm2(&ri) / norm2(&mx[i]);
            r.push(ri);
        }
        let scale = lambda_hi.max(f64::MIN_POSITIVE);
        let rel: Vec<f64> = residuals.iter().map(|v| v / scale).collect();
        trace.push(rel[..wanted].iter().copied().fold(0.0, f64::max));
        if !vector::all_finite(&rel) {
            return Err(Error::NonFinite("eigensolver residual"));
        }
        if rel[..wanted].iter().all(|&r| r <= cfg.rel_tol) {
            converged = true;
            break;
        }
        // guard columns keep iterating until the wanted pairs are done
        let active: Vec<usize> = (0..k).filter(|&i| i >= wanted || rel[i] > cfg.rel_tol).collect();
        if active.is_empty() {
            converged = true;
            break;
        }
        if trace.iterations() >= cfg.max_iter {
            break;
        }

        // search directions: preconditioned residuals and previous steps of
        // the active pairs, kept M-orthogonal to X
        let mut s: Vec<Vec<f64>> = Vec::new();
        for &i in &active {
            s.push(pc.apply(&r[i])?);
        }
        for &i in &active {
            if let Some(pi) = p.get(i) {
                s.push(pi.clone());
            }
        }
        for _ in 0..2 {
            for v in s.iter_mut() {
                for (xj, mxj) in x.iter().zip(&mx) {
                    let c = dot(mxj, v);
                    vector::axpy(-c, xj, v);
                }
            }
        }
        let mut basis = x.clone();
        basis.extend(s);
        let basis = m_orthonormalize(m, basis, 1e-10)?;
        if basis.len() < k {
            restarts += 1;
            if restarts > MAX_RESTARTS {
                return Err(Error::Degenerate { restarts });
            }
            x = fill_block(m, x, k, &mut rng)?;
            p.clear();
            let (l, rx) = rayleigh_ritz(a, m, &x, k)?;
            lambda = l;
            x = rx;
            continue;
        }

        match rayleigh_ritz_full(a, m, &basis, k) {
            Ok((values, coeffs, top)) => {
                lambda_hi = lambda_hi.max(top);
                let q = basis.len();
                let mut new_x = Vec::with_capacity(k);
                let mut new_p = Vec::with_capacity(k);
                for j in 0..k {
                    let mut xj = vec![0.0; n];
                    let mut pj = vec![0.0; n];
                    for (t, bt) in basis.iter().enumerate().take(q) {
                        let c = coeffs[(t, j)];
                        vector::axpy(c, bt, &mut xj);
                        if t >= x.len() {
                            vector::axpy(c, bt, &mut pj);
                        }
                    }
                    new_x.push(xj);
                    new_p.push(pj);
                }
                x = new_x;
                p = new_p;
                lambda = values;
            }
            Err(_) => {
                restarts += 1;
                if restarts > MAX_RESTARTS {
                    return Err(Error::Degenerate { restarts });
                }
                x = fill_block(m, x, k, &mut rng)?;
                p.clear();
                let (l, rx) = rayleigh_ritz(a, m, &x, k)?;
                lambda = l;
                x = rx;
            }
        }
    }

    // final cleanup keeps the block M-orthonormal to working precision
    let x = m_orthonormalize(m, x, 1e-12)?;
    if x.len() < k {
        return Err(Error::Degenerate { restarts });
    }
    let (values, vectors) = rayleigh_ritz(a, m, &x, wanted)?;
    let mut residuals = Vec::with_capacity(wanted);
    for (v, l) in vectors.iter().zip(&values) {
        let av = a.apply(v)?;
        let mv = m.apply(v)?;
        residuals.push(norm2(&vector::lincomb(1.0, &av, -l, &mv)) / norm2(&mv));
    }
    Ok(EigenPairs {
        values,
        vectors,
        residuals,
        trace,
        converged,
    })
}

/// Appends seeded random vectors until the block holds `k` M-orthonormal
/// columns.
fn fill_block(
    m: &OperatorExpr,
    mut x: Vec<Vec<f64>>,
    k: usize,
    rng: &mut rng::SeededRng,
) -> Result<Vec<Vec<f64>>> {
    let n = m.dim();
    for _ in 0..4 {
        while x.len() < k {
            x.push(rng::uniform_vec(rng, n));
        }
        x = m_orthonormalize(m, x, 1e-8)?;
        if x.len() == k {
            return Ok(x);
        }
    }
    Err(Error::Degenerate {
        restarts: MAX_RESTARTS,
    })
}

/// Rayleigh–Ritz on the span of `basis`, returning the `k` lowest pairs.
fn rayleigh_ritz(
    a: &OperatorExpr,
    m: &OperatorExpr,
    basis: &[Vec<f64>],
    k: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let (values, coeffs, _) = rayleigh_ritz_full(a, m, basis, k)?;
    let n = a.dim();
    let vectors = (0..k)
        .map(|j| {
            let mut v = vec![0.0; n];
            for (t, b) in basis.iter().enumerate() {
                vector::axpy(coeffs[(t, j)], b, &mut v);
            }
            v
        })
        .collect();
    Ok((values, vectors))
}

fn rayleigh_ritz_full(
    a: &OperatorExpr,
    m: &OperatorExpr,
    basis: &[Vec<f64>],
    k: usize,
) -> Result<(Vec<f64>, DenseMatrix, f64)> {
    let q = basis.len();
    let ab: Vec<Vec<f64>> = basis.iter().map(|v| a.apply(v)).collect::<Result<_>>()?;
    let mb: Vec<Vec<f64>> = basis.iter().map(|v| m.apply(v)).collect::<Result<_>>()?;
    let mut ga = DenseMatrix::zeros(q, q);
    let mut gm = DenseMatrix::zeros(q, q);
    for i in 0..q {
        for j in i..q {
            let va = dot(&basis[i], &ab[j]);
            let vm = dot(&basis[i], &mb[j]);
            ga[(i, j)] = va;
            ga[(j, i)] = va;
            gm[(i, j)] = vm;
            gm[(j, i)] = vm;
        }
    }
    let eig = generalized_symmetric_eigen(&ga, &gm)?;
    let top = eig.values.last().copied().unwrap_or(0.0);
    let mut coeffs = DenseMatrix::zeros(q, k);
    for j in 0..k {
        for i in 0..q {
            coeffs[(i, j)] = eig.vectors[(i, j)];
        }
    }
    Ok((eig.values[..k].to_vec(), coeffs, top))
}

/// Small problems: materialize both operators and solve densely.
fn dense_pairs(a: &OperatorExpr, m: &OperatorExpr, k: usize) -> Result<EigenPairs> {
    let n = a.dim();
    let mut da = DenseMatrix::zeros(n, n);
    let mut dm = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let ca = a.apply(&e)?;
        let cm = m.apply(&e)?;
        for i in 0..n {
            da[(i, j)] = ca[i];
            dm[(i, j)] = cm[i];
        }
        e[j] = 0.0;
    }
    da.symmetrize();
    dm.symmetrize();
    let eig = generalized_symmetric_eigen(&da, &dm)?;
    let vectors: Vec<Vec<f64>> = (0..k).map(|j| eig.vectors.column(j)).collect();
    let values = eig.values[..k].to_vec();
    let mut residuals = Vec::with_capacity(k);
    for (v, l) in vectors.iter().zip(&values) {
        let av = a.apply(v)?;
        let mv = m.apply(v)?;
        residuals.push(norm2(&vector::lincomb(1.0, &av, -l, &mv)) / norm2(&mv));
    }
    let mut trace = IterationTrace::default();
    trace.push(residuals.iter().copied().fold(0.0, f64::max));
    Ok(EigenPairs {
        values,
        vectors,
        residuals,
        trace,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precond::{Identity, Jacobi};
    use crate::sparse::CsrMatrix;
    use alloc::sync::Arc;

    fn gram_defect(m: &OperatorExpr, v: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..v.len() {
            let mvi = m.apply(&v[i]).unwrap();
            for (j, vj) in v.iter().enumerate() {
                let g = dot(vj, &mvi);
                worst = worst.max((g - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    #[test]
    fn smallest_of_diagonal() {
        let a = OperatorExpr::diagonal(vec![1.0, 2.0, 3.0]);
        let m = OperatorExpr::identity(3, 1.0);
        let cfg = LobpcgConfig {
            block_size: 1,
            ..LobpcgConfig::default()
        };
        let out = lobpcg(&a, &m, &Identity, &cfg).unwrap();
        assert!((out.values[0] - 1.0).abs() < 1e-14);
        assert!((out.vectors[0][0].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_and_one_of_diagonal() {
        let a = OperatorExpr::diagonal(vec![0.0, 1.0, 2.0]);
        let m = OperatorExpr::identity(3, 1.0);
        let cfg = LobpcgConfig {
            block_size: 2,
            ..LobpcgConfig::default()
        };
        let out = lobpcg(&a, &m, &Identity, &cfg).unwrap();
        assert!(out.values[0].abs() < 1e-14 && (out.values[1] - 1.0).abs() < 1e-14);
    }

    fn path_laplacian(n: usize) -> CsrMatrix {
        // graph Laplacian of a path: one zero eigenvalue (constants)
        let mut t = Vec::new();
        for i in 0..n {
            let deg = if i == 0 || i + 1 == n { 1.0 } else { 2.0 };
            t.push((i, i, deg));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(&t, n, n).unwrap()
    }

    fn block_diag(a: &CsrMatrix, b: &CsrMatrix) -> CsrMatrix {
        let mut t = a.to_triplets();
        let off = a.nrows();
        t.extend(b.to_triplets().into_iter().map(|(i, j, v)| (i + off, j + off, v)));
        CsrMatrix::from_triplets(&t, off + b.nrows(), off + b.ncols()).unwrap()
    }

    #[test]
    fn iterative_path_matches_dense_spectrum() {
        let n = 120;
        let lap = path_laplacian(n);
        let mass_diag: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i % 5) as f64)).collect();
        let shifted = Arc::new(lap.add_scaled(1.0, &CsrMatrix::identity(n), 0.0).unwrap());
        let a = OperatorExpr::csr(shifted.clone()).unwrap();
        let m = OperatorExpr::diagonal(mass_diag.clone());
        let pc_mat = lap.add_scaled(1.0, &CsrMatrix::from_diagonal(&mass_diag), 1.0).unwrap();
        let pc = crate::precond::ilu0_factorize(&pc_mat).unwrap();
        let cfg = LobpcgConfig {
            block_size: 4,
            ..LobpcgConfig::default()
        };
        let out = lobpcg(&a, &m, &pc, &cfg).unwrap();
        assert!(out.converged);
        assert!(gram_defect(&m, &out.vectors) <= 1e-10);

        let da = DenseMatrix::from_csr(&shifted);
        let dm = DenseMatrix::from_csr(&CsrMatrix::from_diagonal(&mass_diag));
        let exact = generalized_symmetric_eigen(&da, &dm).unwrap().values;
        for j in 0..4 {
            assert!((out.values[j] - exact[j]).abs() <= 1e-9 * exact[n - 1]);
            assert!(out.values[j] >= -1e-12 && out.values[j] <= exact[n - 1]);
        }
        assert_eq!(crate::solvers::count_zero_modes(&out.values, 1e-8), 1);
    }

    #[test]
    fn double_zero_mode_is_resolved() {
        let lap = block_diag(&path_laplacian(60), &path_laplacian(50));
        let n = lap.nrows();
        let a = OperatorExpr::csr(Arc::new(lap.clone())).unwrap();
        let m = OperatorExpr::identity(n, 1.0);
        let pc = Jacobi::new(&lap.add_scaled(1.0, &CsrMatrix::identity(n), 1.0).unwrap()).unwrap();
        let cfg = LobpcgConfig {
            block_size: 4,
            max_iter: 5000,
            ..LobpcgConfig::default()
        };
        let out = lobpcg(&a, &m, &pc, &cfg).unwrap();
        assert_eq!(crate::solvers::count_zero_modes(&out.values, 1e-8), 2);
        // the two zero modes are independent: their Gram matrix is I
        assert!(gram_defect(&m, &out.vectors[..2]) <= 1e-10);
    }

    #[test]
    fn rejects_bad_block() {
        let a = OperatorExpr::identity(3, 1.0);
        let cfg = LobpcgConfig {
            block_size: 0,
            ..LobpcgConfig::default()
        };
        assert!(lobpcg(&a, &a, &Identity, &cfg).is_err());
    }
}
