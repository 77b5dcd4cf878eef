use super::{IterationTrace, PcgConfig};
use crate::error::{Error, Result};
use crate::operator::OperatorExpr;
use crate::precond::Preconditioner;
use crate::vector::{self, dot, norm2};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

const STAGNATION: f64 = 1e-15;

/// Result of a PCG run. `converged` is false when `max_iter` was exhausted.
#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub trace: IterationTrace,
    pub converged: bool,
    /// Final relative residual (true residual, or the monitored metric).
    pub residual: f64,
}

impl PcgOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.iterations()
    }

    /// Converts a non-converged outcome into a [`Error::Divergence`] naming
    /// `stage`.
    pub fn require_converged(self, stage: &str) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Divergence {
                stage: String::from(stage),
                iterations: self.iterations(),
                residual: self.residual,
            })
        }
    }
}

/// Conjugate gradient iteration advanced one step at a time.
pub struct PcgState<'a> {
    op: &'a OperatorExpr,
    pc: &'a dyn Preconditioner,
    b: &'a [f64],
    x: Vec<f64>,
    r: Vec<f64>,
    p: Vec<f64>,
    rz: f64,
    bnorm: f64,
    iter: usize,
}

impl<'a> PcgState<'a> {
    pub fn new(
        op: &'a OperatorExpr,
        pc: &'a dyn Preconditioner,
        b: &'a [f64],
        x0: Option<&[f64]>,
    ) -> Result<Self> {
        let n = op.dim();
        vector::check_len(b, n, "pcg right-hand side")?;
        vector::check_finite(b, "pcg right-hand side")?;
        let x = match x0 {
            Some(x0) => {
                vector::check_len(x0, n, "pcg initial guess")?;
                x0.to_vec()
            }
            None => vec![0.0; n],
        };
        let mut s = Self {
            op,
            pc,
            b,
            x,
            r: Vec::new(),
            p: Vec::new(),
            rz: 0.0,
            bnorm: norm2(b),
            iter: 0,
        };
        s.restart()?;
        Ok(s)
    }

    /// Recomputes the true residual and resets the search direction.
    pub fn restart(&mut self) -> Result<()> {
        let ax = self.op.apply(&self.x)?;
        self.r = vector::sub(self.b, &ax);
        let z = self.pc.apply(&self.r)?;
        self.rz = dot(&self.r, &z);
        self.p = z;
        Ok(())
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }

    pub fn iterations(&self) -> usize {
        self.iter
    }

    pub fn rhs_norm(&self) -> f64 {
        self.bnorm
    }

    /// Recursively updated `‖b − A x‖ / ‖b‖`.
    pub fn rel_residual(&self) -> f64 {
        if self.bnorm == 0.0 {
            norm2(&self.r)
        } else {
            norm2(&self.r) / self.bnorm
        }
    }

    /// Explicitly recomputed `‖b − A x‖ / ‖b‖`.
    pub fn true_rel_residual(&self) -> Result<f64> {
        let ax = self.op.apply(&self.x)?;
        let r = norm2(&vector::sub(self.b, &ax));
        Ok(if self.bnorm == 0.0 { r } else { r / self.bnorm })
    }

    /// One CG step. Returns `false` on a breakdown (`pᵀAp ≤ 0` or `rᵀz ≤ 0`),
    /// which for a semidefinite operator means no further progress is possible.
    pub fn step(&mut self) -> Result<bool> {
        if !(self.rz > 0.0) {
            return Ok(false);
        }
        let ap = self.op.apply(&self.p)?;
        let pap = dot(&self.p, &ap);
        if !pap.is_finite() {
            return Err(self.divergence());
        }
        if pap <= 0.0 {
            return Ok(false);
        }
        let alpha = self.rz / pap;
        vector::axpy(alpha, &self.p, &mut self.x);
        vector::axpy(-alpha, &ap, &mut self.r);
        let z = self.pc.apply(&self.r)?;
        let rz_new = dot(&self.r, &z);
        if !rz_new.is_finite() || !vector::all_finite(&self.x) {
            return Err(self.divergence());
        }
        let beta = rz_new / self.rz;
        self.rz = rz_new;
        for (pi, zi) in self.p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        self.iter += 1;
        Ok(true)
    }

    fn divergence(&self) -> Error {
        Error::Divergence {
            stage: String::from("pcg"),
            iterations: self.iter,
            residual: f64::NAN,
        }
    }
}

/// Preconditioned conjugate gradients on `op x = rhs`, stopping once the true
/// relative residual is below `cfg.rel_tol`.
pub fn pcg(
    op: &OperatorExpr,
    pc: &dyn Preconditioner,
    rhs: &[f64],
    x0: Option<&[f64]>,
    cfg: &PcgConfig,
) -> Result<PcgOutcome> {
    cfg.validate()?;
    let mut state = PcgState::new(op, pc, rhs, x0)?;
    let mut trace = IterationTrace::default();
    if state.rhs_norm() == 0.0 {
        let x = vec![0.0; op.dim()];
        trace.push(0.0);
        return Ok(PcgOutcome {
            x,
            trace,
            converged: true,
            residual: 0.0,
        });
    }
    let mut restarts = 0;
    loop {
        let rel = state.rel_residual();
        if cfg.record_trace || trace.residuals.is_empty() {
            trace.push(rel);
        }
        if rel <= cfg.rel_tol {
            // guard against drift between recursive and true residuals
            let true_rel = state.true_rel_residual()?;
            if true_rel <= cfg.rel_tol {
                return Ok(finish(state, trace, true, true_rel));
            }
            if restarts >= 5 {
                return Ok(finish(state, trace, false, true_rel));
            }
            restarts += 1;
            state.restart()?;
            continue;
        }
        if state.iterations() >= cfg.max_iter {
            return Ok(finish(state, trace, false, rel));
        }
        if !state.step()? {
            let true_rel = state.true_rel_residual()?;
            return Ok(finish(state, trace, true_rel <= cfg.rel_tol, true_rel));
        }
    }
}

/// PCG whose stopping test is an external metric of the current iterate
/// (for instance the residual of the original constrained system). The trace
/// records the metric.
pub fn pcg_monitored(
    op: &OperatorExpr,
    pc: &dyn Preconditioner,
    rhs: &[f64],
    x0: Option<&[f64]>,
    cfg: &PcgConfig,
    metric: &mut dyn FnMut(&[f64]) -> Result<f64>,
) -> Result<PcgOutcome> {
    cfg.validate()?;
    let mut state = PcgState::new(op, pc, rhs, x0)?;
    let mut trace = IterationTrace::default();
    let mut refreshed = false;
    loop {
        let value = metric(state.x())?;
        if !value.is_finite() {
            return Err(Error::NonFinite("monitored residual"));
        }
        if cfg.record_trace || trace.residuals.is_empty() {
            trace.push(value);
        }
        if value <= cfg.rel_tol {
            return Ok(finish(state, trace, true, value));
        }
        if state.iterations() >= cfg.max_iter {
            return Ok(finish(state, trace, false, value));
        }
        // the linear system is solved to round-off; the metric cannot improve
        if state.rel_residual() <= STAGNATION && state.true_rel_residual()? <= STAGNATION {
            return Ok(finish(state, trace, false, value));
        }
        if !state.step()? {
            // one restart from the true residual before giving up
            if refreshed {
                return Ok(finish(state, trace, false, value));
            }
            refreshed = true;
            state.restart()?;
        }
    }
}

fn finish(state: PcgState<'_>, mut trace: IterationTrace, converged: bool, residual: f64) -> PcgOutcome {
    if let Some(last) = trace.residuals.last_mut() {
        if converged {
            *last = last.min(residual);
        }
    }
    PcgOutcome {
        x: state.into_x(),
        trace,
        converged,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::precond::{Identity, Jacobi};
    use crate::rng;
    use crate::sparse::CsrMatrix;
    use alloc::sync::Arc;

    fn laplacian(n: usize, shift: f64) -> Arc<CsrMatrix> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        Arc::new(CsrMatrix::from_triplets(&t, n, n).unwrap())
    }

    #[test]
    fn identity_converges_in_one_step() {
        let op = OperatorExpr::identity(4, 1.0);
        let b = [1.0, -2.0, 3.0, 0.5];
        let out = pcg(&op, &Identity, &b, None, &PcgConfig::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations(), 1);
        assert!(vector::rel_diff(&out.x, &b) < 1e-15);
    }

    #[test]
    fn diagonal_finite_termination() {
        let op = OperatorExpr::diagonal((1..=10).map(|v| v as f64).collect());
        let mut r = rng::seeded(3);
        let b = rng::uniform_vec(&mut r, 10);
        let cfg = PcgConfig::default().with_tol(1e-12);
        let out = pcg(&op, &Identity, &b, None, &cfg).unwrap();
        assert!(out.converged);
        assert!(out.iterations() <= 10);
        assert!(out.residual <= 1e-12);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let op = OperatorExpr::csr(laplacian(5, 0.0)).unwrap();
        let out = pcg(&op, &Identity, &[0.0; 5], None, &PcgConfig::default()).unwrap();
        assert!(out.converged && out.x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn max_iter_is_reported() {
        let op = OperatorExpr::csr(laplacian(50, 0.0)).unwrap();
        let b = vec![1.0; 50];
        let cfg = PcgConfig {
            max_iter: 3,
            ..PcgConfig::default()
        };
        let out = pcg(&op, &Identity, &b, None, &cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations(), 3);
        assert!(matches!(
            out.require_converged("demo"),
            Err(Error::Divergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn non_finite_rhs_rejected() {
        let op = OperatorExpr::identity(2, 1.0);
        assert!(pcg(&op, &Identity, &[1.0, f64::NAN], None, &PcgConfig::default()).is_err());
    }

    #[test]
    fn error_energy_norm_is_monotone() {
        let a = laplacian(30, 0.1);
        let op = OperatorExpr::csr(a.clone()).unwrap();
        let mut r = rng::seeded(8);
        let b = rng::uniform_vec(&mut r, 30);
        let exact = DenseMatrix::from_csr(&a).solve_spd(&b).unwrap();
        let jac = Jacobi::new(&a).unwrap();
        let mut state = PcgState::new(&op, &jac, &b, None).unwrap();
        let energy = |x: &[f64]| {
            let e = vector::sub(x, &exact);
            dot(&e, &a.spmv(&e).unwrap())
        };
        let mut prev = energy(state.x());
        while state.rel_residual() > 1e-12 && state.step().unwrap() {
            let now = energy(state.x());
            assert!(now <= prev * (1.0 + 1e-12) + 1e-28);
            prev = now;
        }
        assert!(vector::rel_diff(state.x(), &exact) < 1e-10);
    }

    #[test]
    fn monitored_metric_controls_stopping() {
        let a = laplacian(20, 0.5);
        let op = OperatorExpr::csr(a.clone()).unwrap();
        let b = vec![1.0; 20];
        let bn = norm2(&b);
        let mut metric = |x: &[f64]| -> Result<f64> {
            Ok(norm2(&vector::sub(&b, &a.spmv(x)?)) / bn)
        };
        let cfg = PcgConfig::default().with_tol(1e-9);
        let out = pcg_monitored(&op, &Identity, &b, None, &cfg, &mut metric).unwrap();
        assert!(out.converged && out.residual <= 1e-9);
        assert_eq!(out.trace.last(), Some(out.residual));
    }
}
