use super::harmonic::harmonic_basis_cached;
use super::{
    auto_select_kind, constraint_defect, default_alphas, inconsistent_residual, mixed_residual,
    recover_bp, recover_bp_two_alpha, stage_name, ConstrainedSystem, HarmonicBasis, ProblemKind,
    ResidualMetric, NO_UNIQUE_SOLUTION,
};
use crate::error::{Error, Result};
use crate::operator::OperatorExpr;
use crate::precond::{augmented_matrix, PrecondKind, Preconditioner};
use crate::solvers::{pcg, pcg_monitored, IterationTrace, LobpcgConfig, PcgConfig, PcgOutcome};
use crate::vector;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

/// One preconditioner per distinct operator `A + β BUBᵀ + γ M`.
///
/// Operators without a mass term (`γ = 0`), and those carrying the low-rank
/// harmonic term, share the factorization of `A + β BUBᵀ + M`.
pub struct PrecondCache {
    kind: PrecondKind,
    entries: Vec<((u64, u64), Arc<dyn Preconditioner>)>,
    warnings: Vec<String>,
}

impl PrecondCache {
    pub fn new(kind: PrecondKind) -> Self {
        Self {
            kind,
            entries: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Messages about factorizations that fell back to Jacobi.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn kind(&self) -> PrecondKind {
        self.kind
    }

    /// Number of factorizations built so far.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(
        &mut self,
        sys: &ConstrainedSystem,
        beta: f64,
        gamma: f64,
    ) -> Result<Arc<dyn Preconditioner>> {
        let gamma = if gamma > 0.0 { gamma } else { 1.0 };
        let key = (beta.to_bits(), gamma.to_bits());
        if let Some((_, pc)) = self.entries.iter().find(|(k, _)| *k == key) {
            return Ok(pc.clone());
        }
        let pc: Arc<dyn Preconditioner> = match self.kind {
            PrecondKind::Identity => Arc::new(crate::precond::Identity),
            kind => {
                let matrix = augmented_matrix(&sys.a, &sys.b, &sys.u, &sys.m, beta, gamma)?;
                let (pc, fell_back) = kind.build_reporting(&matrix)?;
                if fell_back {
                    self.warnings.push(format!(
                        "{} of A + {beta} BUBt + {gamma} M is not positive; using jacobi",
                        kind.name()
                    ));
                }
                Arc::from(pc)
            }
        };
        self.entries.push((key, pc.clone()));
        Ok(pc)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Equivalent problem to run; `None` selects from the measured `dim C₀`.
    pub kind: Option<ProblemKind>,
    pub precond: PrecondKind,
    /// Tolerance of every stage before the last.
    pub intermediate_tol: f64,
    /// Tolerance of the final stage, measured with `metric`.
    pub final_tol: f64,
    pub max_iter: usize,
    /// `(α₁, α₂)` for the two-α path; `None` uses [`default_alphas`].
    pub alphas: Option<(f64, f64)>,
    pub lobpcg: LobpcgConfig,
    /// Topological prediction of `dim C₀`, used to size the eigensolver
    /// block and cross-checked against the measurement.
    pub expected_dim_c0: Option<usize>,
    pub metric: ResidualMetric,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            kind: None,
            precond: PrecondKind::Ilu0,
            intermediate_tol: 1e-11,
            final_tol: 1e-10,
            max_iter: 5000,
            alphas: None,
            lobpcg: LobpcgConfig::default(),
            expected_dim_c0: None,
            metric: ResidualMetric::Mixed,
        }
    }
}

impl SolveOptions {
    fn stage_cfg(&self, tol: f64) -> PcgConfig {
        PcgConfig {
            rel_tol: tol,
            max_iter: self.max_iter,
            record_trace: true,
        }
    }
}

/// `F = Mf₀ + Mf₁ + Mf₂` with `Mf₁ = Aũ`, `Mf₂ = BUBᵀũ`, `Mf₀ = MHHᵀMũ`.
#[derive(Debug, Clone)]
pub struct HodgeSplit {
    pub tilde_u: Vec<f64>,
    pub mf0: Vec<f64>,
    pub mf1: Vec<f64>,
    pub mf2: Vec<f64>,
    pub trace: IterationTrace,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Vec<f64>,
    /// The product `B p`; `p` itself is not computed.
    pub bp: Vec<f64>,
    pub dim_c0: usize,
    pub kind: ProblemKind,
    /// `(stage name, trace)` in execution order.
    pub stages: Vec<(String, IterationTrace)>,
    pub final_residual: f64,
    pub metric: ResidualMetric,
    /// `final_residual ≤ final_tol`.
    pub converged: bool,
    /// `‖G − Bᵀu‖ / ‖G‖`; for an inconsistent `G` this estimates its
    /// inconsistent part.
    pub constraint_defect: f64,
    pub u_g: Vec<f64>,
    pub tilde_u: Vec<f64>,
    pub alphas: Option<(f64, f64)>,
    pub harmonic: HarmonicBasis,
    pub warnings: Vec<String>,
}

impl Solution {
    pub fn stage(&self, name: &str) -> Option<&IterationTrace> {
        self.stages.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

fn harmonic_ref(h: &HarmonicBasis) -> Option<&HarmonicBasis> {
    (h.dim > 0).then_some(h)
}

fn stage(
    name: &str,
    op: &OperatorExpr,
    pc: &dyn Preconditioner,
    rhs: &[f64],
    cfg: &PcgConfig,
) -> Result<PcgOutcome> {
    pcg(op, pc, rhs, None, cfg)?.require_converged(name)
}

/// Solves `(A + BUBᵀ [+ MHHᵀM]) ũ = F` and splits `F` accordingly.
pub fn hodge_split_rhs(
    sys: &ConstrainedSystem,
    h: &HarmonicBasis,
    opts: &SolveOptions,
    cache: &mut PrecondCache,
) -> Result<HodgeSplit> {
    let h = harmonic_ref(h);
    let op = sys.operator(1.0, 0.0, h);
    let pc = cache.get(sys, 1.0, 0.0)?;
    let out = stage("split", &op, pc.as_ref(), &sys.f, &opts.stage_cfg(opts.intermediate_tol))?;
    let tilde_u = out.x;
    let mf1 = sys.a.spmv(&tilde_u)?;
    let mf2 = sys.bub_apply(&tilde_u)?;
    let mf0 = match h {
        Some(h) => {
            let low = OperatorExpr::low_rank_sym(sys.m.clone(), Arc::new(h.columns.clone()))?;
            low.apply(&tilde_u)?
        }
        None => vec![0.0; sys.n()],
    };
    Ok(HodgeSplit {
        tilde_u,
        mf0,
        mf1,
        mf2,
        trace: out.trace,
    })
}

/// Solves `(A + BUBᵀ [+ MHHᵀM]) u_g = BUG`; `u_g ∈ C₂` and `Bᵀu_g` is the
/// consistent part of `G`.
pub fn lift_constraint(
    sys: &ConstrainedSystem,
    h: &HarmonicBasis,
    opts: &SolveOptions,
    cache: &mut PrecondCache,
) -> Result<(Vec<f64>, IterationTrace)> {
    if sys.g_is_zero() {
        let mut t = IterationTrace::default();
        t.push(0.0);
        return Ok((vec![0.0; sys.n()], t));
    }
    let op = sys.operator(1.0, 0.0, harmonic_ref(h));
    let pc = cache.get(sys, 1.0, 0.0)?;
    let rhs = sys.bug()?;
    let out = stage("lift", &op, pc.as_ref(), &rhs, &opts.stage_cfg(opts.intermediate_tol))?;
    Ok((out.x, out.trace))
}

/// Runs the staged solves of `kind`.
pub fn solve_equivalent(
    sys: &ConstrainedSystem,
    kind: ProblemKind,
    h: &HarmonicBasis,
    opts: &SolveOptions,
    cache: &mut PrecondCache,
) -> Result<Solution> {
    if !kind.is_admissible(h.dim, sys.c) {
        return Err(if h.dim > 0 && sys.c == 0.0 {
            Error::Unsupported(format!("dim C0 = {} with c = 0: {NO_UNIQUE_SOLUTION}", h.dim))
        } else {
            Error::Config(format!(
                "{} is not admissible for dim C0 = {} and c = {}",
                kind.name(),
                h.dim,
                sys.c
            ))
        });
    }
    if opts.metric == ResidualMetric::Inconsistent && sys.u.as_scalar().is_none() {
        return Err(Error::Unsupported(
            "the inconsistent-datum residual needs U = alpha I".into(),
        ));
    }
    if kind == ProblemKind::Dim0CZeroTwoAlpha {
        return two_alpha(sys, h, opts, cache);
    }

    let mut stages = Vec::new();
    let c = sys.c;
    let needs_lift = matches!(
        kind,
        ProblemKind::Dim0General
            | ProblemKind::Dim0CPos
            | ProblemKind::DimPosCPosFull
            | ProblemKind::DimPosCPosLight
    ) && !sys.g_is_zero();
    let u_g = if needs_lift {
        let (u_g, trace) = lift_constraint(sys, h, opts, cache)?;
        stages.push((stage_name("lift"), trace));
        u_g
    } else {
        vec![0.0; sys.n()]
    };
    let split = hodge_split_rhs(sys, h, opts, cache)?;
    stages.push((stage_name("split"), split.trace.clone()));
    let tilde_u = split.tilde_u;
    let bp = recover_bp(sys, &tilde_u, &u_g)?;

    // F − BUBᵀũ, shared by every final right-hand side
    let mut rhs = vector::sub(&sys.f, &split.mf2);
    let (beta, gamma) = match kind {
        ProblemKind::Dim0General | ProblemKind::DimPosCPosFull => {
            vector::axpy(1.0, &sys.bug()?, &mut rhs);
            (1.0, c)
        }
        ProblemKind::Dim0CPos | ProblemKind::DimPosCPosLight => (0.0, c),
        ProblemKind::Dim0CZeroTwoStage => {
            vector::axpy(1.0, &sys.bug()?, &mut rhs);
            (1.0, 0.0)
        }
        ProblemKind::Dim0CZeroTwoAlpha => unreachable!("handled above"),
    };
    if gamma != 0.0 {
        vector::axpy(gamma, &sys.m.spmv(&u_g)?, &mut rhs);
    }
    let op = sys.operator(beta, gamma, None);
    let pc = cache.get(sys, beta, gamma)?;
    let cfg = opts.stage_cfg(opts.final_tol);
    let out = match opts.metric {
        ResidualMetric::Mixed => {
            let mut metric = |x: &[f64]| mixed_residual(sys, x, &bp);
            pcg_monitored(&op, pc.as_ref(), &rhs, None, &cfg, &mut metric)?
        }
        ResidualMetric::Inconsistent => {
            let mut metric = |x: &[f64]| inconsistent_residual(sys, x, &bp);
            pcg_monitored(&op, pc.as_ref(), &rhs, None, &cfg, &mut metric)?
        }
        ResidualMetric::Stage => pcg(&op, pc.as_ref(), &rhs, None, &cfg)?,
    };
    stages.push((stage_name("final"), out.trace));
    let u = out.x;
    let final_residual = out.residual;
    Ok(Solution {
        constraint_defect: constraint_defect(sys, &u)?,
        converged: final_residual <= opts.final_tol,
        u,
        bp,
        dim_c0: h.dim,
        kind,
        stages,
        final_residual,
        metric: opts.metric,
        u_g,
        tilde_u,
        alphas: None,
        harmonic: h.clone(),
        warnings: cache.warnings().to_vec(),
    })
}

fn two_alpha(
    sys: &ConstrainedSystem,
    h: &HarmonicBasis,
    opts: &SolveOptions,
    cache: &mut PrecondCache,
) -> Result<Solution> {
    let (a1, a2) = match opts.alphas {
        Some(p) => p,
        None => default_alphas(sys)?,
    };
    if !(a1 > 0.0 && a2 > 0.0) || a1 == a2 {
        return Err(Error::Config(format!(
            "two-alpha path needs distinct positive alphas, got ({a1}, {a2})"
        )));
    }
    let bug = sys.bug()?;
    let cfg = opts.stage_cfg(opts.intermediate_tol);
    let mut stages = Vec::new();
    let mut sols = Vec::with_capacity(2);
    for (name, alpha) in [("alpha1", a1), ("alpha2", a2)] {
        let op = sys.operator(alpha, 0.0, None);
        let pc = cache.get(sys, alpha, 0.0)?;
        let rhs = vector::lincomb(1.0, &sys.f, alpha, &bug);
        let out = stage(name, &op, pc.as_ref(), &rhs, &cfg)?;
        stages.push((stage_name(name), out.trace));
        sols.push(out.x);
    }
    let (u1, u2) = (&sols[0], &sols[1]);
    let u = vector::lincomb(a1 / (a1 - a2), u1, -a2 / (a1 - a2), u2);
    let y = vector::lincomb(a1 * a2 / (a2 - a1), u1, -a1 * a2 / (a2 - a1), u2);
    let bp = recover_bp_two_alpha(sys, &y)?;
    let final_residual = match opts.metric {
        ResidualMetric::Inconsistent => inconsistent_residual(sys, &u, &bp)?,
        _ => mixed_residual(sys, &u, &bp)?,
    };
    Ok(Solution {
        constraint_defect: constraint_defect(sys, &u)?,
        converged: final_residual <= opts.final_tol,
        u,
        bp,
        dim_c0: h.dim,
        kind: ProblemKind::Dim0CZeroTwoAlpha,
        stages,
        final_residual,
        metric: opts.metric,
        u_g: vec![0.0; sys.n()],
        tilde_u: y,
        alphas: Some((a1, a2)),
        harmonic: h.clone(),
        warnings: cache.warnings().to_vec(),
    })
}

/// Measures `dim C₀`, selects the equivalent problem (unless fixed in
/// `opts`) and solves.
pub fn solve(sys: &ConstrainedSystem, opts: &SolveOptions) -> Result<Solution> {
    let mut cache = PrecondCache::new(opts.precond);
    let mut lob = opts.lobpcg;
    if let Some(e) = opts.expected_dim_c0 {
        lob.block_size = e + 2;
    }
    let h = harmonic_basis_cached(sys, &lob, &mut cache)?;
    let mut warnings = Vec::new();
    if let Some(e) = opts.expected_dim_c0 {
        if e != h.dim {
            warnings.push(format!(
                "measured dim C0 = {} differs from the topological prediction {e}",
                h.dim
            ));
        }
    }
    let kind = match opts.kind {
        Some(k) => k,
        None => auto_select_kind(h.dim, sys.c)?,
    };
    let mut sol = solve_equivalent(sys, kind, &h, opts, &mut cache)?;
    sol.stages.insert(0, (stage_name("harmonic"), h.trace.clone()));
    warnings.append(&mut sol.warnings);
    sol.warnings = warnings;
    Ok(sol)
}
