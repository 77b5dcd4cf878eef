//! The work behind the command line: solving and writing result
//! directories, penalty sweeps and system checks.

use crate::error::{IoError, Result};
use crate::trace::write_trace;
use crate::vecio::write_vec_file;
use derham_core::constrained::{
    harmonic_basis, penalty_solve, solve, solve_equivalent, verify_complex_property,
    PrecondCache,
};
use derham_core::fem::AssembledProblem;
use derham_core::oracle::{dense_dim_c0, dense_kkt_solve_ranked, dense_penalty_solve, KKT_CAP};
use derham_core::vector::rel_diff;
use derham_core::{ConstrainedSystem, LobpcgConfig, PcgConfig, Solution, SolveOptions};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

/// Largest `dim C₀`-defect an imported system may have without `--force`.
pub const COMPLEX_TOL: f64 = 1e-9;
/// Largest accepted deviation from the dense saddle-point solution.
pub const ORACLE_TOL: f64 = 1e-8;
/// Unknown count up to which penalty systems are solved densely.
pub const DENSE_PENALTY_CAP: usize = 2000;
/// Unknown count up to which `check` repeats the kernel count densely.
pub const DENSE_CHECK_CAP: usize = 1500;

#[derive(Debug, Clone)]
pub struct RunReport {
    pub label: String,
    pub unknowns: usize,
    pub multipliers: usize,
    pub kind: String,
    pub precond: String,
    pub metric: String,
    pub dim_c0: usize,
    pub predicted_dim_c0: Option<usize>,
    pub final_residual: f64,
    pub final_tol: f64,
    pub converged: bool,
    pub constraint_defect: f64,
    /// `(stage, iterations)`, in execution order.
    pub stages: Vec<(String, usize)>,
    pub oracle_deviation: Option<f64>,
    pub warnings: Vec<String>,
}

impl RunReport {
    /// The exit-status criterion: final residual within tolerance and, if
    /// requested, agreement with the dense solution.
    pub fn success(&self) -> bool {
        self.converged
            && self.final_residual <= self.final_tol
            && self.oracle_deviation.is_none_or(|d| d <= ORACLE_TOL)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem = {}", self.label);
        let _ = writeln!(s, "unknowns = {}", self.unknowns);
        let _ = writeln!(s, "multipliers = {}", self.multipliers);
        let _ = writeln!(s, "dim_c0 = {}", self.dim_c0);
        if let Some(p) = self.predicted_dim_c0 {
            let _ = writeln!(s, "predicted_dim_c0 = {p}");
        }
        let _ = writeln!(s, "kind = {}", self.kind);
        let _ = writeln!(s, "precond = {}", self.precond);
        let _ = writeln!(s, "metric = {}", self.metric);
        let _ = writeln!(s, "final_residual = {:.6e}", self.final_residual);
        let _ = writeln!(s, "final_tol = {:e}", self.final_tol);
        let _ = writeln!(s, "converged = {}", self.converged);
        let _ = writeln!(s, "constraint_defect = {:.6e}", self.constraint_defect);
        for (name, it) in &self.stages {
            let _ = writeln!(s, "iterations.{name} = {it}");
        }
        if let Some(d) = self.oracle_deviation {
            let _ = writeln!(s, "oracle_deviation = {d:.6e}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning = {w}");
        }
        let _ = writeln!(s, "status = {}", if self.success() { "ok" } else { "failed" });
        s
    }
}

/// Solves `sys` and writes `summary.txt`, `trace_<stage>.csv`, `u.vec` and
/// `bp.vec` into `out`.
pub fn solve_to_dir(
    sys: &ConstrainedSystem,
    opts: &SolveOptions,
    label: &str,
    check_oracle: bool,
    out: &Path,
) -> Result<(Solution, RunReport)> {
    let sol = solve(sys, opts)?;
    let oracle_deviation = if check_oracle {
        let (u, _, _) = dense_kkt_solve_ranked(sys)?;
        Some(rel_diff(&sol.u, &u))
    } else {
        None
    };
    let report = RunReport {
        label: label.to_string(),
        unknowns: sys.n(),
        multipliers: sys.n_constraints(),
        kind: sol.kind.name().to_string(),
        precond: opts.precond.name().to_string(),
        metric: sol.metric.name().to_string(),
        dim_c0: sol.dim_c0,
        predicted_dim_c0: opts.expected_dim_c0,
        final_residual: sol.final_residual,
        final_tol: opts.final_tol,
        converged: sol.converged,
        constraint_defect: sol.constraint_defect,
        stages: sol
            .stages
            .iter()
            .map(|(n, t)| (n.clone(), t.iterations()))
            .collect(),
        oracle_deviation,
        warnings: sol.warnings.clone(),
    };
    write_outputs(out, &sol, &report)?;
    Ok((sol, report))
}

pub fn write_outputs(dir: &Path, sol: &Solution, report: &RunReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    for (stage, trace) in &sol.stages {
        let path = dir.join(format!("trace_{stage}.csv"));
        let f = File::create(&path).map_err(|e| IoError::file(&path, e))?;
        write_trace(BufWriter::new(f), stage, trace).map_err(|e| IoError::file(&path, e))?;
    }
    write_vec_file(&dir.join("u.vec"), &sol.u)?;
    write_vec_file(&dir.join("bp.vec"), &sol.bp)?;
    let path = dir.join("summary.txt");
    fs::write(&path, report.summary()).map_err(|e| IoError::file(path, e))
}

/// Source of the exact solution in a penalty sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// The dense saddle-point solve when it is affordable and unique,
    /// otherwise the equivalent problem.
    Auto,
    Oracle,
    Equivalent,
}

impl Reference {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(Reference::Auto),
            "oracle" => Some(Reference::Oracle),
            "equivalent" => Some(Reference::Equivalent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepShape {
    DecreaseThenIncrease,
    Decreasing,
    Increasing,
    Flat,
}

impl SweepShape {
    pub fn name(self) -> &'static str {
        match self {
            SweepShape::DecreaseThenIncrease => "decrease-then-increase",
            SweepShape::Decreasing => "decreasing",
            SweepShape::Increasing => "increasing",
            SweepShape::Flat => "flat",
        }
    }

    /// Classifies errors listed in increasing `ε` order by where the
    /// minimum sits.
    pub fn classify(errors: &[f64]) -> Self {
        let Some(first) = errors.first() else {
            return SweepShape::Flat;
        };
        let last = errors.len() - 1;
        let (m, min) = errors
            .iter()
            .enumerate()
            .fold((0, *first), |(bi, bv), (i, v)| if *v < bv { (i, *v) } else { (bi, bv) });
        if m == 0 {
            if errors[last] > min {
                SweepShape::Increasing
            } else {
                SweepShape::Flat
            }
        } else if m == last {
            SweepShape::Decreasing
        } else {
            SweepShape::DecreaseThenIncrease
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub reference: &'static str,
    /// `(ε, relative error, solver converged)`, sorted by `ε`.
    pub points: Vec<(f64, f64, bool)>,
    pub shape: SweepShape,
}

impl SweepReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("epsilon,error,converged\n");
        for (e, err, ok) in &self.points {
            let _ = writeln!(s, "{e:e},{err:.17e},{ok}");
        }
        s
    }

    /// Writes `penalty.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
        let path = dir.join("penalty.csv");
        fs::write(&path, self.csv()).map_err(|e| IoError::file(path, e))
    }
}

/// Relative error of the penalty solution against the exact `u` for every
/// `ε`. Small systems are solved densely so the precision floor shows.
pub fn penalty_sweep(
    p: &AssembledProblem,
    eps: &[f64],
    reference: Reference,
    opts: &SolveOptions,
) -> Result<SweepReport> {
    let sys = &p.system;
    let fits = sys.n() + sys.n_constraints() <= KKT_CAP;
    let oracle = match reference {
        Reference::Equivalent => None,
        Reference::Oracle if !fits => {
            return Err(IoError::Usage(format!(
                "{} unknowns exceed the dense solver cap {KKT_CAP}",
                sys.n() + sys.n_constraints()
            )))
        }
        Reference::Oracle => Some(dense_kkt_solve_ranked(sys)?.0),
        Reference::Auto if fits => {
            let (u, _, rank) = dense_kkt_solve_ranked(sys)?;
            (rank == sys.n() + sys.n_constraints()).then_some(u)
        }
        Reference::Auto => None,
    };
    let (exact, name) = match oracle {
        Some(u) => (u, "oracle"),
        None => {
            let o = SolveOptions {
                expected_dim_c0: opts.expected_dim_c0.or(Some(p.predicted_dim_c0())),
                ..*opts
            };
            (solve(sys, &o)?.u, "equivalent")
        }
    };
    let mut sorted = eps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cfg = PcgConfig {
        rel_tol: 1e-12,
        max_iter: 20 * opts.max_iter,
        record_trace: false,
    };
    let mut points = Vec::with_capacity(sorted.len());
    for e in sorted {
        let (u, ok) = if sys.n() <= DENSE_PENALTY_CAP {
            (dense_penalty_solve(sys, e)?, true)
        } else {
            let out = penalty_solve(sys, e, opts.precond, &cfg)?;
            (out.x, out.converged)
        };
        points.push((e, rel_diff(&u, &exact), ok));
    }
    let errors: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(SweepReport {
        reference: name,
        shape: SweepShape::classify(&errors),
        points,
    })
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub complex_defect: f64,
    pub a_symmetry: f64,
    pub m_symmetry: f64,
    pub dim_c0: usize,
    pub predicted_dim_c0: Option<usize>,
    pub dense_dim_c0: Option<usize>,
    pub gram_defect: f64,
    pub harmonic_residual: f64,
    /// Whether the Full and Light (or two-stage and two-α) paths agree.
    pub path_deviation: Option<f64>,
}

impl CheckReport {
    pub fn ok(&self) -> bool {
        self.complex_defect <= COMPLEX_TOL
            && self.a_symmetry <= 1e-12
            && self.m_symmetry <= 1e-12
            && self.predicted_dim_c0.is_none_or(|p| p == self.dim_c0)
            && self.dense_dim_c0.is_none_or(|d| d == self.dim_c0)
            && self.gram_defect <= 1e-10
            && self.harmonic_residual <= 1e-8
            && self.path_deviation.is_none_or(|d| d <= 1e-8)
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "complex_defect = {:.3e}", self.complex_defect);
        let _ = writeln!(s, "a_symmetry = {:.3e}", self.a_symmetry);
        let _ = writeln!(s, "m_symmetry = {:.3e}", self.m_symmetry);
        let _ = writeln!(s, "dim_c0 = {}", self.dim_c0);
        if let Some(p) = self.predicted_dim_c0 {
            let _ = writeln!(s, "predicted_dim_c0 = {p}");
        }
        if let Some(d) = self.dense_dim_c0 {
            let _ = writeln!(s, "dense_dim_c0 = {d}");
        }
        let _ = writeln!(s, "gram_defect = {:.3e}", self.gram_defect);
        let _ = writeln!(s, "harmonic_residual = {:.3e}", self.harmonic_residual);
        if let Some(d) = self.path_deviation {
            let _ = writeln!(s, "path_deviation = {d:.3e}");
        }
        let _ = writeln!(s, "status = {}", if self.ok() { "ok" } else { "failed" });
        s
    }
}

/// Complex property, symmetry, harmonic basis and path agreement.
pub fn check_system(
    sys: &ConstrainedSystem,
    opts: &SolveOptions,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    let complex_defect = verify_complex_property(sys, trials, seed)?;
    let rel_sym = |a: &derham_core::CsrMatrix| a.symmetry_defect() / a.max_abs().max(f64::MIN_POSITIVE);
    let cfg = LobpcgConfig {
        block_size: opts.expected_dim_c0.map_or(opts.lobpcg.block_size, |d| d + 2),
        ..opts.lobpcg
    };
    let h = harmonic_basis(sys, &cfg, opts.precond)?;
    let dense = if sys.n() <= DENSE_CHECK_CAP {
        Some(dense_dim_c0(sys, 1e-10)?)
    } else {
        None
    };
    let path_deviation = {
        use derham_core::ProblemKind::*;
        let pair = match (h.dim, sys.c > 0.0) {
            (0, false) => Some((Dim0CZeroTwoStage, Dim0CZeroTwoAlpha)),
            (0, true) => Some((Dim0General, Dim0CPos)),
            (_, true) => Some((DimPosCPosFull, DimPosCPosLight)),
            (_, false) => None,
        };
        match pair {
            Some((k1, k2)) => {
                let mut cache = PrecondCache::new(opts.precond);
                let a = solve_equivalent(sys, k1, &h, opts, &mut cache)?;
                let b = solve_equivalent(sys, k2, &h, opts, &mut cache)?;
                Some(rel_diff(&a.u, &b.u))
            }
            None => None,
        }
    };
    Ok(CheckReport {
        complex_defect,
        a_symmetry: rel_sym(&sys.a),
        m_symmetry: rel_sym(&sys.m),
        dim_c0: h.dim,
        predicted_dim_c0: opts.expected_dim_c0,
        dense_dim_c0: dense,
        gram_defect: h.gram_defect(sys)?,
        harmonic_residual: h.residuals(sys)?.into_iter().fold(0.0, f64::max),
        path_deviation,
    })
}
