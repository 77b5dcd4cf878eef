//! Constrained systems `(A + cM)u + Bp = F`, `Bᵀu = G` and their reduction
//! to sequences of symmetric positive (semi-)definite solves.
//!
//! The reductions rest on the complex property `A M⁻¹ B = 0`, which splits
//! the unknown space M-orthogonally as `C₀ ⊕ C₁ ⊕ C₂` with
//! `C₀ = Ker A ∩ Ker BUBᵀ` (harmonic), `C₂ = M⁻¹ Im B` and `C₁` the rest.
//! `A` maps `C₁` onto `M C₁` and annihilates `C₀` and `C₂`; `BUBᵀ` maps `C₂`
//! onto `M C₂` and annihilates `C₀` and `C₁`.
//!
//! Only `Bp` is produced, never `p`: when `B` is rank deficient `p` is not
//! unique but `Bp` is.

mod harmonic;
mod solve;

pub use harmonic::{harmonic_basis, HarmonicBasis};
pub use solve::{
    hodge_split_rhs, lift_constraint, solve, solve_equivalent, HodgeSplit, PrecondCache,
    Solution, SolveOptions,
};

use crate::error::{Error, Result};
use crate::operator::{OperatorExpr, Weight};
use crate::precond::{Jacobi, PrecondKind};
use crate::rng;
use crate::solvers::{pcg, PcgConfig, PcgOutcome};
use crate::sparse::CsrMatrix;
use crate::vector::{self, norm2};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

/// The data `(A, B, M, U, c, F, G)` of a constrained problem.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    pub a: Arc<CsrMatrix>,
    pub b: Arc<CsrMatrix>,
    pub m: Arc<CsrMatrix>,
    pub u: Weight,
    pub c: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl ConstrainedSystem {
    /// Validates shapes, symmetry of `A` and `M` (`1e-12` relative), `c ≥ 0`
    /// and finiteness of the data.
    pub fn new(
        a: CsrMatrix,
        b: CsrMatrix,
        m: CsrMatrix,
        u: Weight,
        c: f64,
        f: Vec<f64>,
        g: Vec<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || m.shape() != (n, n) || b.nrows() != n {
            return Err(Error::Dimension(format!(
                "A {:?}, M {:?}, B {:?} are not conformant",
                a.shape(),
                m.shape(),
                b.shape()
            )));
        }
        if !a.is_symmetric(1e-12) {
            return Err(Error::Structure("A is not symmetric".into()));
        }
        if !m.is_symmetric(1e-12) {
            return Err(Error::Structure("M is not symmetric".into()));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("c must be a nonnegative number, got {c}")));
        }
        u.validate(b.ncols())?;
        for (name, mat) in [("A", &a), ("B", &b), ("M", &m)] {
            if !vector::all_finite(mat.values()) {
                return Err(Error::Structure(format!("{name} has non-finite entries")));
            }
        }
        let sys = Self {
            a: Arc::new(a),
            b: Arc::new(b),
            m: Arc::new(m),
            u,
            c,
            f: Vec::new(),
            g: Vec::new(),
        };
        sys.with_rhs(f, g)
    }

    /// Same operators, new right-hand sides.
    pub fn with_rhs(mut self, f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        vector::check_len(&f, self.n(), "F")?;
        vector::check_len(&g, self.n_constraints(), "G")?;
        vector::check_finite(&f, "F")?;
        vector::check_finite(&g, "G")?;
        self.f = f;
        self.g = g;
        Ok(self)
    }

    /// Number of primal unknowns `N`.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of multipliers (columns of `B`).
    pub fn n_constraints(&self) -> usize {
        self.b.ncols()
    }

    pub fn a_op(&self) -> OperatorExpr {
        OperatorExpr::csr_trusted(self.a.clone())
    }

    pub fn m_op(&self) -> OperatorExpr {
        OperatorExpr::csr_trusted(self.m.clone())
    }

    pub fn bub_op(&self) -> OperatorExpr {
        OperatorExpr::triple_product(self.b.clone(), self.u.clone())
            .expect("weight validated on construction")
    }

    /// `A + β BUBᵀ + γ M [+ M H Hᵀ M]`, applied lazily.
    pub fn operator(&self, beta: f64, gamma: f64, h: Option<&HarmonicBasis>) -> OperatorExpr {
        let mut terms = vec![self.a_op()];
        if beta != 0.0 {
            terms.push(self.bub_op().scaled(beta));
        }
        if gamma != 0.0 {
            terms.push(self.m_op().scaled(gamma));
        }
        if let Some(h) = h.filter(|h| h.dim > 0) {
            terms.push(
                OperatorExpr::low_rank_sym(self.m.clone(), Arc::new(h.columns.clone()))
                    .expect("harmonic columns sized on extraction"),
            );
        }
        OperatorExpr::sum(terms).expect("all terms act on the primal space")
    }

    /// `B U Bᵀ x`
    pub fn bub_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.b.spmv_t(x)?;
        self.b.spmv(&self.u.apply(&y)?)
    }

    /// `B U G`
    pub fn bug(&self) -> Result<Vec<f64>> {
        self.b.spmv(&self.u.apply(&self.g)?)
    }

    /// Explicit sparse `B U Bᵀ`.
    pub fn bub_matrix(&self) -> Result<CsrMatrix> {
        self.u.sandwich(&self.b)
    }

    pub fn g_is_zero(&self) -> bool {
        self.g.iter().all(|v| *v == 0.0)
    }
}

/// The equivalent problems. `Dim0` kinds need `dim C₀ = 0`, `DimPos` kinds
/// need `dim C₀ > 0` and `c > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// `(A + BUBᵀ) u_g = BUG`, `(A + BUBᵀ) ũ = F`,
    /// `(A + BUBᵀ + cM) u = F − BUBᵀũ + BUG + cM u_g`.
    Dim0General,
    /// Same first stages, then `(A + cM) u = F − BUBᵀũ + cM u_g` (`c > 0`).
    Dim0CPos,
    /// `(A + BUBᵀ) ũ = F`, `(A + BUBᵀ) u = F − BUBᵀũ + BUG` (`c = 0`).
    Dim0CZeroTwoStage,
    /// `(A + αᵢ BUBᵀ) uᵢ = F + αᵢ BUG` for two values of `α`, combined (`c = 0`).
    Dim0CZeroTwoAlpha,
    /// As `Dim0General` with `M H Hᵀ M` added to the first two operators.
    DimPosCPosFull,
    /// As `Dim0CPos` with `M H Hᵀ M` added to the first two operators.
    DimPosCPosLight,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 6] = [
        ProblemKind::Dim0General,
        ProblemKind::Dim0CPos,
        ProblemKind::Dim0CZeroTwoStage,
        ProblemKind::Dim0CZeroTwoAlpha,
        ProblemKind::DimPosCPosFull,
        ProblemKind::DimPosCPosLight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Dim0General => "dim0-general",
            ProblemKind::Dim0CPos => "dim0-cpos",
            ProblemKind::Dim0CZeroTwoStage => "dim0-czero-two-stage",
            ProblemKind::Dim0CZeroTwoAlpha => "dim0-czero-two-alpha",
            ProblemKind::DimPosCPosFull => "dimpos-cpos-full",
            ProblemKind::DimPosCPosLight => "dimpos-cpos-light",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_admissible(self, dim_c0: usize, c: f64) -> bool {
        match self {
            ProblemKind::Dim0General => dim_c0 == 0,
            ProblemKind::Dim0CPos => dim_c0 == 0 && c > 0.0,
            ProblemKind::Dim0CZeroTwoStage | ProblemKind::Dim0CZeroTwoAlpha => {
                dim_c0 == 0 && c == 0.0
            }
            ProblemKind::DimPosCPosFull | ProblemKind::DimPosCPosLight => dim_c0 > 0 && c > 0.0,
        }
    }
}

pub(crate) const NO_UNIQUE_SOLUTION: &str = "no solution or no unique solution";

/// Default equivalent problem for a measured `dim C₀` and `c`.
pub fn auto_select_kind(dim_c0: usize, c: f64) -> Result<ProblemKind> {
    match (dim_c0, c > 0.0) {
        (0, true) => Ok(ProblemKind::Dim0CPos),
        (0, false) => Ok(ProblemKind::Dim0CZeroTwoStage),
        (_, true) => Ok(ProblemKind::DimPosCPosFull),
        (d, false) => Err(Error::Unsupported(format!(
            "dim C0 = {d} with c = 0: {NO_UNIQUE_SOLUTION}"
        ))),
    }
}

/// How the final residual of a solve is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualMetric {
    /// [`mixed_residual`]
    #[default]
    Mixed,
    /// [`inconsistent_residual`]; needs `U = αI`.
    Inconsistent,
    /// Relative residual of the last stage's linear system.
    Stage,
}

impl ResidualMetric {
    pub fn name(self) -> &'static str {
        match self {
            ResidualMetric::Mixed => "mixed",
            ResidualMetric::Inconsistent => "inconsistent",
            ResidualMetric::Stage => "stage",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mixed" => Some(ResidualMetric::Mixed),
            "inconsistent" => Some(ResidualMetric::Inconsistent),
            "stage" => Some(ResidualMetric::Stage),
            _ => None,
        }
    }
}

/// `Bp = BUBᵀũ − cM u_g`.
pub fn recover_bp(sys: &ConstrainedSystem, tilde_u: &[f64], u_g: &[f64]) -> Result<Vec<f64>> {
    let mut bp = sys.bub_apply(tilde_u)?;
    if sys.c != 0.0 {
        let mug = sys.m.spmv(u_g)?;
        vector::axpy(-sys.c, &mug, &mut bp);
    }
    Ok(bp)
}

/// `Bp = BUBᵀ u⁽²⁾` for the two-α path.
pub fn recover_bp_two_alpha(sys: &ConstrainedSystem, u2: &[f64]) -> Result<Vec<f64>> {
    sys.bub_apply(u2)
}

fn momentum_residual(sys: &ConstrainedSystem, u: &[f64], bp: &[f64]) -> Result<Vec<f64>> {
    vector::check_len(u, sys.n(), "u")?;
    vector::check_len(bp, sys.n(), "Bp")?;
    let mut r = vector::sub(&sys.f, bp);
    vector::axpy(-1.0, &sys.a.spmv(u)?, &mut r);
    if sys.c != 0.0 {
        vector::axpy(-sys.c, &sys.m.spmv(u)?, &mut r);
    }
    Ok(r)
}

/// `(‖F − Bp − (A + cM)u‖ + ‖G − Bᵀu‖) / (‖F‖ + ‖G‖)`
pub fn mixed_residual(sys: &ConstrainedSystem, u: &[f64], bp: &[f64]) -> Result<f64> {
    let r1 = norm2(&momentum_residual(sys, u, bp)?);
    let r2 = norm2(&vector::sub(&sys.g, &sys.b.spmv_t(u)?));
    Ok(normalized(r1 + r2, sys))
}

/// `(‖F − Bp − (A + cM)u‖ + α‖BG − BBᵀu‖) / (‖F‖ + ‖G‖)` for `U = αI`.
///
/// Insensitive to the part of `G` in `Ker B`, which no `u` can match.
pub fn inconsistent_residual(sys: &ConstrainedSystem, u: &[f64], bp: &[f64]) -> Result<f64> {
    let alpha = sys.u.as_scalar().ok_or_else(|| {
        Error::Unsupported("the inconsistent-datum residual needs U = alpha I".into())
    })?;
    let r1 = norm2(&momentum_residual(sys, u, bp)?);
    let btu = sys.b.spmv_t(u)?;
    let r2 = norm2(&sys.b.spmv(&vector::sub(&sys.g, &btu))?);
    Ok(normalized(r1 + alpha * r2, sys))
}

fn normalized(r: f64, sys: &ConstrainedSystem) -> f64 {
    let scale = norm2(&sys.f) + norm2(&sys.g);
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

/// `‖G − Bᵀu‖ / ‖G‖` (absolute when `G = 0`).
pub fn constraint_defect(sys: &ConstrainedSystem, u: &[f64]) -> Result<f64> {
    let d = norm2(&vector::sub(&sys.g, &sys.b.spmv_t(u)?));
    let g = norm2(&sys.g);
    Ok(if g > 0.0 { d / g } else { d })
}

/// Largest observed `‖A y‖ / (‖A‖_F ‖y‖)` over `trials` random `p`, where
/// `M y = B p` is solved by Jacobi-preconditioned CG to `1e-13`.
pub fn verify_complex_property(sys: &ConstrainedSystem, trials: usize, seed: u64) -> Result<f64> {
    let m_op = sys.m_op();
    let jac = Jacobi::new(&sys.m)?;
    let cfg = PcgConfig {
        rel_tol: 1e-13,
        max_iter: 10 * sys.n() + 100,
        record_trace: false,
    };
    let a_norm = sys.a.frobenius_norm();
    let mut r = rng::seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let p = rng::uniform_vec(&mut r, sys.n_constraints());
        let bp = sys.b.spmv(&p)?;
        let y = pcg(&m_op, &jac, &bp, None, &cfg)?
            .require_converged("complex property mass solve")?
            .x;
        let ay = norm2(&sys.a.spmv(&y)?);
        let defect = ay / (a_norm * norm2(&y) + f64::MIN_POSITIVE);
        worst = worst.max(defect);
    }
    Ok(worst)
}

/// Penalty approximation `(A + cM + εBBᵀ) u_ε = F + εBG`, solved by PCG.
pub fn penalty_solve(
    sys: &ConstrainedSystem,
    epsilon: f64,
    precond: PrecondKind,
    cfg: &PcgConfig,
) -> Result<PcgOutcome> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!(
            "penalty parameter must be positive, got {epsilon}"
        )));
    }
    let (op, mut matrix) = penalty_operator(sys, epsilon)?;
    if sys.c == 0.0 {
        // same shift as the equivalent-problem stages without a mass term
        matrix = matrix.add_scaled(1.0, &sys.m, 1.0)?;
    }
    let pc = precond.build(&matrix)?;
    let mut rhs = sys.f.clone();
    vector::axpy(epsilon, &sys.b.spmv(&sys.g)?, &mut rhs);
    pcg(&op, pc.as_ref(), &rhs, None, cfg)
}

/// Lazy and assembled forms of `A + cM + εBBᵀ`.
pub fn penalty_operator(sys: &ConstrainedSystem, epsilon: f64) -> Result<(OperatorExpr, CsrMatrix)> {
    let mut terms = vec![sys.a_op()];
    if sys.c != 0.0 {
        terms.push(sys.m_op().scaled(sys.c));
    }
    terms.push(OperatorExpr::triple_product(sys.b.clone(), Weight::Scalar(epsilon))?);
    let op = OperatorExpr::sum(terms)?;
    let matrix = sys
        .a
        .add_scaled(1.0, &sys.m, sys.c)?
        .add_scaled(1.0, &Weight::Scalar(epsilon).sandwich(&sys.b)?, 1.0)?;
    Ok((op, matrix))
}

/// `(α₁, α₂) = (ρ, 2ρ)` with `ρ = ‖A‖_∞ / ‖BUBᵀ‖_∞`.
pub fn default_alphas(sys: &ConstrainedSystem) -> Result<(f64, f64)> {
    let bub = sys.bub_matrix()?.norm_inf();
    let rho = if bub > 0.0 { sys.a.norm_inf() / bub } else { 1.0 };
    let rho = if rho > 0.0 && rho.is_finite() { rho } else { 1.0 };
    Ok((rho, 2.0 * rho))
}

pub(crate) fn stage_name(s: &str) -> String {
    String::from(s)
}
