//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p derham --test acceptance`.

use derham_core::constrained::{
    harmonic_basis, hodge_split_rhs, inconsistent_residual, solve, solve_equivalent,
    verify_complex_property, PrecondCache,
};
use derham_core::fem::{AssembledProblem, Example, GMode};
use derham_core::oracle::{dense_dim_c0, dense_kkt_solve, dense_penalty_solve, spectrum_containment_check};
use derham_core::vector::{dot, norm2, rel_diff};
use derham_core::{
    HarmonicBasis, LobpcgConfig, PrecondKind, ProblemKind, ResidualMetric, Solution, SolveOptions,
};
use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

const N: usize = 8;
const SEED: u64 = 42;

type Outcome = Result<String, String>;

struct Suite {
    failures: usize,
}

impl Suite {
    fn check(&mut self, id: u32, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let mut out = f();
        let took = start.elapsed();
        if let (Ok(msg), Some(limit)) = (&out, limit) {
            if took > limit {
                out = Err(format!("{msg}; took {took:.1?}, limit {limit:?}"));
            }
        }
        let (tag, msg) = match out {
            Ok(m) => ("PASS", m),
            Err(m) => {
                self.failures += 1;
                ("FAIL", m)
            }
        };
        println!("{tag} {id:>2} {name}: {msg} [{:.2}s]", took.as_secs_f64());
    }
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn opts(p: &AssembledProblem) -> SolveOptions {
    SolveOptions {
        expected_dim_c0: Some(p.predicted_dim_c0()),
        ..Default::default()
    }
}

fn small_basis(p: &AssembledProblem) -> Result<HarmonicBasis, String> {
    let cfg = LobpcgConfig {
        block_size: 3,
        ..Default::default()
    };
    harmonic_basis(&p.system, &cfg, PrecondKind::Ilu0).map_err(err)
}

struct Case {
    ex: Example,
    problem: AssembledProblem,
    solution: Result<Solution, String>,
}

fn solved(c: &Case) -> Result<&Solution, String> {
    c.solution
        .as_ref()
        .map_err(|e| format!("example {}: {e}", c.ex.number()))
}

fn main() {
    let mut suite = Suite { failures: 0 };
    let cases: Vec<Case> = Example::ALL
        .iter()
        .map(|&ex| {
            let problem = ex.build(N, SEED, GMode::Consistent).expect("assembly");
            let solution = solve(&problem.system, &opts(&problem)).map_err(err);
            Case { ex, problem, solution }
        })
        .collect();

    suite.check(1, "complex property", Some(Duration::from_secs(60)), || {
        let mut worst = 0.0f64;
        for c in &cases {
            worst = worst.max(verify_complex_property(&c.problem.system, 20, 1).map_err(err)?);
        }
        ensure(worst <= 1e-9, format!("max defect {worst:.2e} over 20 trials, n = {N}"))
    });

    suite.check(2, "kernel dimensions", None, || {
        let expected = [0, 0, 1, 0, 1];
        let mut measured = Vec::new();
        let mut dense = Vec::new();
        for c in &cases {
            measured.push(small_basis(&c.problem)?.dim);
            let small = c.ex.assemble(4).map_err(err)?;
            dense.push(dense_dim_c0(&small.system, 1e-10).map_err(err)?);
        }
        ensure(
            measured == expected && dense == expected,
            format!("LOBPCG n = {N}: {measured:?}, dense n = 4: {dense:?}, expected {expected:?}"),
        )
    });

    suite.check(3, "oracle equivalence", Some(Duration::from_secs(30)), || {
        let p = Example::One.build(4, SEED, GMode::Consistent).map_err(err)?;
        let mut cache = PrecondCache::new(PrecondKind::Ilu0);
        let s = solve_equivalent(
            &p.system,
            ProblemKind::Dim0CZeroTwoStage,
            &HarmonicBasis::empty(),
            &opts(&p),
            &mut cache,
        )
        .map_err(err)?;
        let (u, _) = dense_kkt_solve(&p.system).map_err(err)?;
        let d = rel_diff(&s.u, &u);
        ensure(d <= 1e-8, format!("relative difference {d:.2e}"))
    });

    suite.check(4, "path equivalence", None, || {
        let pairs = [
            (0, ProblemKind::Dim0CZeroTwoStage, ProblemKind::Dim0CZeroTwoAlpha),
            (3, ProblemKind::Dim0CZeroTwoStage, ProblemKind::Dim0CZeroTwoAlpha),
            (2, ProblemKind::DimPosCPosFull, ProblemKind::DimPosCPosLight),
            (4, ProblemKind::DimPosCPosFull, ProblemKind::DimPosCPosLight),
        ];
        let mut parts = Vec::new();
        let mut ok = true;
        for (i, k1, k2) in pairs {
            let c = &cases[i];
            let h = &solved(c)?.harmonic;
            let o = opts(&c.problem);
            let mut cache = PrecondCache::new(PrecondKind::Ilu0);
            let a = solve_equivalent(&c.problem.system, k1, h, &o, &mut cache).map_err(err)?;
            let b = solve_equivalent(&c.problem.system, k2, h, &o, &mut cache).map_err(err)?;
            let d = rel_diff(&a.u, &b.u);
            ok &= d <= 1e-8;
            parts.push(format!("ex{} {d:.1e}", c.ex.number()));
        }
        ensure(ok, parts.join(", "))
    });

    suite.check(5, "final mixed residual", None, || {
        let mut parts = Vec::new();
        let mut ok = true;
        for c in &cases {
            let s = solved(c)?;
            ok &= s.converged && s.metric == ResidualMetric::Mixed && s.final_residual <= 1e-10;
            parts.push(format!("ex{} {:.1e}", c.ex.number(), s.final_residual));
        }
        ensure(ok, parts.join(", "))
    });

    suite.check(6, "constraint satisfaction", None, || {
        let mut parts = Vec::new();
        let mut ok = true;
        for c in &cases {
            let d = solved(c)?.constraint_defect;
            ok &= d <= 1e-8;
            parts.push(format!("ex{} {d:.1e}", c.ex.number()));
        }
        ensure(ok, parts.join(", "))
    });

    suite.check(7, "spectral containment", Some(Duration::from_secs(120)), || {
        let mut parts = Vec::new();
        let mut ok = true;
        for ex in [Example::Three, Example::Five] {
            let p = ex.build(4, SEED, GMode::Consistent).map_err(err)?;
            let h = small_basis(&p)?;
            let c = spectrum_containment_check(&p.system, &h, 1e-8).map_err(err)?;
            ok &= c.violations == 0;
            parts.push(format!(
                "ex{} {} violations in [{:.3}, 1]",
                ex.number(),
                c.violations,
                c.lower_bound
            ));
        }
        ensure(ok, parts.join(", "))
    });

    suite.check(8, "penalty behaviour", None, || {
        let p = Example::One.build(4, SEED, GMode::Consistent).map_err(err)?;
        let (u, _) = dense_kkt_solve(&p.system).map_err(err)?;
        let e = |eps: f64| dense_penalty_solve(&p.system, eps).map(|x| rel_diff(&x, &u)).map_err(err);
        let (e2, e6, e8, e14) = (e(1e2)?, e(1e6)?, e(1e8)?, e(1e14)?);
        ensure(
            e6 < e2 && e14 > e8,
            format!("error 1e2 {e2:.1e}, 1e6 {e6:.1e}, 1e8 {e8:.1e}, 1e14 {e14:.1e}"),
        )
    });

    suite.check(9, "preconditioning effect", None, || {
        let mut parts = Vec::new();
        let mut ok = true;
        for c in &cases {
            let ilu = solved(c)?.stage("final").map_or(0, |t| t.iterations());
            let plain = SolveOptions {
                precond: PrecondKind::Identity,
                ..opts(&c.problem)
            };
            let s = solve(&c.problem.system, &plain).map_err(err)?;
            let none = s.stage("final").map_or(0, |t| t.iterations());
            ok &= s.converged && 2 * ilu <= none;
            parts.push(format!("ex{} {ilu}/{none}", c.ex.number()));
        }
        ensure(ok, format!("final stage ILU(0)/none: {}", parts.join(", ")))
    });

    suite.check(10, "Hodge split", None, || {
        let mut recon = 0.0f64;
        let mut cross = 0.0f64;
        for c in &cases {
            let sys = &c.problem.system;
            let h = &solved(c)?.harmonic;
            let mut cache = PrecondCache::new(PrecondKind::Ilu0);
            let s = hodge_split_rhs(sys, h, &opts(&c.problem), &mut cache).map_err(err)?;
            let total: Vec<f64> = (0..sys.n()).map(|i| s.mf0[i] + s.mf1[i] + s.mf2[i]).collect();
            recon = recon.max(rel_diff(&total, &sys.f));
            let scale = norm2(&sys.f);
            for col in &h.columns {
                let w = norm2(col) * scale;
                cross = cross.max(dot(col, &s.mf1).abs() / w);
                cross = cross.max(dot(col, &s.mf2).abs() / w);
            }
        }
        ensure(
            recon <= 1e-9 && cross <= 1e-7,
            format!("reconstruction {recon:.1e}, harmonic cross terms {cross:.1e}"),
        )
    });

    suite.check(11, "harmonic basis", None, || {
        let mut gram = 0.0f64;
        let mut res = 0.0f64;
        let mut dims = Vec::new();
        for i in [2, 4] {
            let c = &cases[i];
            let h = &solved(c)?.harmonic;
            dims.push(h.dim);
            gram = gram.max(h.gram_defect(&c.problem.system).map_err(err)?);
            for r in h.residuals(&c.problem.system).map_err(err)? {
                res = res.max(r);
            }
        }
        ensure(
            dims.iter().all(|d| *d > 0) && gram <= 1e-10 && res <= 1e-8,
            format!("dims {dims:?}, Gram defect {gram:.1e}, max column residual {res:.1e}"),
        )
    });

    suite.check(12, "inconsistent G", None, || {
        let p = Example::Two.build(N, SEED, GMode::Inconsistent(1e-2)).map_err(err)?;
        let o = SolveOptions {
            metric: ResidualMetric::Inconsistent,
            ..opts(&p)
        };
        let s = solve(&p.system, &o).map_err(err)?;
        let r = inconsistent_residual(&p.system, &s.u, &s.bp).map_err(err)?;
        let d = s.constraint_defect;
        ensure(
            s.converged && r <= 1e-9 && (d - 1e-2).abs() <= 0.2e-2,
            format!("inconsistent residual {r:.1e}, constraint defect {d:.4e}"),
        )
    });

    suite.check(13, "determinism", None, || {
        let dir = tempfile::tempdir().map_err(err)?;
        let mut listings = Vec::new();
        for run in ["a", "b"] {
            let out = dir.path().join(run);
            let status = Command::new(env!("CARGO_BIN_EXE_derham"))
                .args(["run", "--example", "3", "-n", "8", "--seed", "42", "--out"])
                .arg(&out)
                .output()
                .map_err(err)?;
            if !status.status.success() {
                return Err(String::from_utf8_lossy(&status.stderr).into_owned());
            }
            let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
                .map_err(err)?
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.starts_with("trace_") && n.ends_with(".csv"))
                .map(|n| {
                    let bytes = fs::read(out.join(&n)).unwrap_or_default();
                    (n, bytes)
                })
                .collect();
            files.sort();
            listings.push(files);
        }
        let count = listings[0].len();
        ensure(
            count >= 4 && listings[0] == listings[1],
            format!("{count} trace files compared byte for byte"),
        )
    });

    if suite.failures > 0 {
        println!("{} criteria failed", suite.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
