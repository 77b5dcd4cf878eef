use super::solve::PrecondCache;
use super::ConstrainedSystem;
use crate::error::{Error, Result};
use crate::operator::m_orthonormalize;
use crate::precond::PrecondKind;
use crate::solvers::{count_zero_modes, lobpcg, IterationTrace, LobpcgConfig};
use crate::vector::{dot, norm2};
use alloc::string::String;
use alloc::vec::Vec;

/// Zero-eigenvalue threshold relative to the largest eigenvalue of the block.
pub const ZERO_MODE_THRESHOLD: f64 = 1e-8;

const MAX_ENLARGEMENTS: usize = 3;

/// M-orthonormal basis `H` of `C₀ = Ker A ∩ Ker BUBᵀ`.
#[derive(Debug, Clone, Default)]
pub struct HarmonicBasis {
    pub columns: Vec<Vec<f64>>,
    pub dim: usize,
    /// The whole computed block of `(A + BUBᵀ) x = λ M x`, ascending.
    pub eigenvalues: Vec<f64>,
    pub trace: IterationTrace,
}

impl HarmonicBasis {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_columns(columns: Vec<Vec<f64>>) -> Self {
        Self {
            dim: columns.len(),
            columns,
            eigenvalues: Vec::new(),
            trace: IterationTrace::default(),
        }
    }

    /// `max |HᵀMH − I|`
    pub fn gram_defect(&self, sys: &ConstrainedSystem) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, hi) in self.columns.iter().enumerate() {
            let mh = sys.m.spmv(hi)?;
            for (j, hj) in self.columns.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(hj, &mh) - target).abs());
            }
        }
        Ok(worst)
    }

    /// Per column `‖(A + BUBᵀ) h‖ / ‖M h‖`.
    pub fn residuals(&self, sys: &ConstrainedSystem) -> Result<Vec<f64>> {
        let op = sys.operator(1.0, 0.0, None);
        self.columns
            .iter()
            .map(|h| Ok(norm2(&op.apply(h)?) / norm2(&sys.m.spmv(h)?)))
            .collect()
    }

    /// `Hᵀ x`
    pub fn coefficients(&self, x: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|h| dot(h, x)).collect()
    }
}

/// Extracts the numerical zero modes of `(A + BUBᵀ) x = λ M x` by LOBPCG,
/// preconditioned with ILU(0) (or `precond`) of `A + BUBᵀ + M`.
///
/// When every computed eigenvalue is a zero mode the block may be too small
/// to hold all of `C₀`; it is enlarged by two and the solve repeated, at most
/// three times.
pub fn harmonic_basis(
    sys: &ConstrainedSystem,
    cfg: &LobpcgConfig,
    precond: PrecondKind,
) -> Result<HarmonicBasis> {
    let mut cache = PrecondCache::new(precond);
    harmonic_basis_cached(sys, cfg, &mut cache)
}

pub(crate) fn harmonic_basis_cached(
    sys: &ConstrainedSystem,
    cfg: &LobpcgConfig,
    cache: &mut PrecondCache,
) -> Result<HarmonicBasis> {
    let n = sys.n();
    let op = sys.operator(1.0, 0.0, None);
    let m = sys.m_op();
    let pc = cache.get(sys, 1.0, 0.0)?;
    let mut block = cfg.block_size.clamp(1, n.max(1));
    let mut attempt = 0;
    loop {
        let run = LobpcgConfig {
            block_size: block,
            ..*cfg
        };
        let pairs = lobpcg(&op, &m, pc.as_ref(), &run)?;
        if !pairs.converged {
            return Err(Error::Divergence {
                stage: String::from("harmonic"),
                iterations: pairs.trace.iterations(),
                residual: pairs.trace.last().unwrap_or(f64::NAN),
            });
        }
        let zeros = count_zero_modes(&pairs.values, ZERO_MODE_THRESHOLD);
        if zeros < block || block == n {
            let columns = m_orthonormalize(&m, pairs.vectors[..zeros].to_vec(), 1e-8)?;
            return Ok(HarmonicBasis {
                dim: columns.len(),
                columns,
                eigenvalues: pairs.values,
                trace: pairs.trace,
            });
        }
        attempt += 1;
        if attempt > MAX_ENLARGEMENTS {
            return Err(Error::Degenerate { restarts: attempt });
        }
        block = (block + 2).min(n);
    }
}
