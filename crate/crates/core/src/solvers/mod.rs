//! Krylov and block eigensolvers over [`OperatorExpr`](crate::OperatorExpr).

mod lobpcg;
mod pcg;

pub use lobpcg::{lobpcg, EigenPairs};
pub use pcg::{pcg, pcg_monitored, PcgOutcome, PcgState};

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub record_trace: bool,
}

impl Default for PcgConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 5000,
            record_trace: true,
        }
    }
}

impl PcgConfig {
    pub fn with_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }

    pub(crate) fn validate(&self) -> crate::Result<()> {
        if !(self.rel_tol > 0.0) || self.max_iter == 0 {
            return Err(crate::Error::Config(alloc::format!(
                "pcg needs rel_tol > 0 and max_iter >= 1 (got {:e}, {})",
                self.rel_tol,
                self.max_iter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LobpcgConfig {
    pub block_size: usize,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LobpcgConfig {
    fn default() -> Self {
        Self {
            block_size: 3,
            rel_tol: 1e-11,
            max_iter: 2000,
            seed: 42,
        }
    }
}

/// Residual history of one iterative solve. Entry `i` is the relative
/// residual before iteration `i` (entry 0 is the initial residual).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub residuals: Vec<f64>,
}

impl IterationTrace {
    pub fn push(&mut self, r: f64) {
        self.residuals.push(r);
    }

    /// Number of iterations performed.
    pub fn iterations(&self) -> usize {
        self.residuals.len().saturating_sub(1)
    }

    pub fn last(&self) -> Option<f64> {
        self.residuals.last().copied()
    }
}

/// Number of eigenvalues `≤ rel_threshold · λ_ref`, where `λ_ref` is the
/// largest entry of the (ascending) list.
pub fn count_zero_modes(eigenvalues: &[f64], rel_threshold: f64) -> usize {
    let Some(reference) = eigenvalues.iter().copied().reduce(f64::max) else {
        return 0;
    };
    let cut = rel_threshold * reference.abs();
    eigenvalues.iter().filter(|&&l| l <= cut).count()
}
