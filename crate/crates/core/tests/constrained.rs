use derham_core::constrained::{
    auto_select_kind, constraint_defect, harmonic_basis, hodge_split_rhs, inconsistent_residual,
    lift_constraint, mixed_residual, penalty_solve, recover_bp, solve, solve_equivalent,
    PrecondCache,
};
use derham_core::fem::{assemble_system, build_mesh, DomainSpec, Example, GMode, Shape};
use derham_core::fem::{BoundaryCondition, Problem};
use derham_core::oracle::dense_kkt_solve;
use derham_core::vector::{norm2, rel_diff, sub};
use derham_core::*;

fn opts(p: &fem::AssembledProblem) -> SolveOptions {
    SolveOptions {
        expected_dim_c0: Some(p.predicted_dim_c0()),
        ..Default::default()
    }
}

fn basis(sys: &ConstrainedSystem) -> HarmonicBasis {
    let cfg = LobpcgConfig {
        block_size: 3,
        ..Default::default()
    };
    harmonic_basis(sys, &cfg, PrecondKind::Ilu0).unwrap()
}

#[test]
fn harmonic_dimensions_follow_topology() {
    for (ex, dim) in [(Example::One, 0), (Example::Three, 1), (Example::Five, 1)] {
        let p = ex.build(4, 1, GMode::Zero).unwrap();
        let h = basis(&p.system);
        assert_eq!(h.dim, dim, "example {}", ex.number());
        if dim > 0 {
            assert!(h.gram_defect(&p.system).unwrap() <= 1e-10);
            assert!(h.residuals(&p.system).unwrap().iter().all(|r| *r <= 1e-8));
        }
    }
}

#[test]
fn kind_table() {
    assert_eq!(auto_select_kind(0, 1.0).unwrap(), ProblemKind::Dim0CPos);
    assert_eq!(auto_select_kind(0, 0.0).unwrap(), ProblemKind::Dim0CZeroTwoStage);
    assert_eq!(auto_select_kind(1, 1.0).unwrap(), ProblemKind::DimPosCPosFull);
    let err = auto_select_kind(1, 0.0).unwrap_err().to_string();
    assert!(err.contains("no solution or no unique solution"), "{err}");
}

#[test]
fn harmonic_case_without_mass_is_rejected() {
    let mesh = build_mesh(&DomainSpec::new(Shape::CubeTunnel, 4)).unwrap();
    let p = assemble_system(&mesh, Problem::Maxwell, BoundaryCondition::Neumann, 0.0, None).unwrap();
    let (f, g) = p.make_rhs(2, GMode::Consistent).unwrap();
    let p = p.with_rhs(f, g).unwrap();
    let err = solve(&p.system, &opts(&p)).unwrap_err().to_string();
    assert!(err.contains("no solution or no unique solution"), "{err}");
}

#[test]
fn split_of_a_pure_constraint_load() {
    let p = Example::One.build(4, 7, GMode::Zero).unwrap();
    let sys = &p.system;
    let w: Vec<f64> = (0..sys.n_constraints()).map(|i| (i as f64 * 0.37).sin()).collect();
    let f = sys.b.spmv(&sys.u.apply(&w).unwrap()).unwrap();
    let sys = sys.clone().with_rhs(f.clone(), vec![0.0; sys.n_constraints()]).unwrap();
    let mut cache = PrecondCache::new(PrecondKind::Ilu0);
    let split = hodge_split_rhs(&sys, &HarmonicBasis::empty(), &opts(&p), &mut cache).unwrap();
    assert!(norm2(&split.mf1) <= 1e-9 * norm2(&f));
    assert!(rel_diff(&split.mf2, &f) <= 1e-9);
    assert!(split.mf0.iter().all(|v| *v == 0.0));
}

#[test]
fn split_of_a_harmonic_load() {
    let p = Example::Three.build(4, 7, GMode::Zero).unwrap();
    let h = basis(&p.system);
    let f = p.system.m.spmv(&h.columns[0]).unwrap();
    let sys = p.system.clone().with_rhs(f.clone(), vec![0.0; p.system.n_constraints()]).unwrap();
    let mut cache = PrecondCache::new(PrecondKind::Ilu0);
    let split = hodge_split_rhs(&sys, &h, &opts(&p), &mut cache).unwrap();
    assert!(rel_diff(&split.mf0, &f) <= 1e-8);
    assert!(norm2(&split.mf1) <= 1e-8 * norm2(&f));
    assert!(norm2(&split.mf2) <= 1e-8 * norm2(&f));
}

#[test]
fn split_reconstructs_random_load() {
    for ex in [Example::One, Example::Five] {
        let p = ex.build(4, 9, GMode::Zero).unwrap();
        let h = basis(&p.system);
        let mut cache = PrecondCache::new(PrecondKind::Ilu0);
        let s = hodge_split_rhs(&p.system, &h, &opts(&p), &mut cache).unwrap();
        let total: Vec<f64> = (0..p.system.n()).map(|i| s.mf0[i] + s.mf1[i] + s.mf2[i]).collect();
        assert!(rel_diff(&total, &p.system.f) <= 1e-9, "example {}", ex.number());
    }
}

#[test]
fn lift_satisfies_consistent_constraint() {
    let p = Example::One.build(4, 5, GMode::Consistent).unwrap();
    let mut cache = PrecondCache::new(PrecondKind::Ilu0);
    let (u_g, _) = lift_constraint(&p.system, &HarmonicBasis::empty(), &opts(&p), &mut cache).unwrap();
    assert!(constraint_defect(&p.system, &u_g).unwrap() <= 1e-8);

    let zero = Example::One.build(4, 5, GMode::Zero).unwrap();
    let (u0, _) = lift_constraint(&zero.system, &HarmonicBasis::empty(), &opts(&zero), &mut cache).unwrap();
    assert!(u0.iter().all(|v| *v == 0.0));
}

#[test]
fn lift_keeps_only_the_consistent_part() {
    let p = Example::Two.build(4, 5, GMode::Inconsistent(0.1)).unwrap();
    let sys = &p.system;
    let mut cache = PrecondCache::new(PrecondKind::Ilu0);
    let (u_g, _) = lift_constraint(sys, &HarmonicBasis::empty(), &opts(&p), &mut cache).unwrap();
    let gap = sub(&sys.g, &sys.b.spmv_t(&u_g).unwrap());
    let filtered = norm2(&sys.b.spmv(&gap).unwrap());
    assert!(filtered <= 1e-8 * norm2(&sys.b.spmv(&sys.g).unwrap()));
    // the leftover is the constant kernel component of relative size 0.1
    let rel = norm2(&gap) / norm2(&sys.g);
    assert!((rel - 0.1 / (1.0f64 + 0.01).sqrt()).abs() < 2e-3, "{rel}");
}

#[test]
fn lift_lies_in_the_constraint_component() {
    let p = Example::Three.build(4, 5, GMode::Consistent).unwrap();
    let sys = &p.system;
    let h = basis(sys);
    let mut cache = PrecondCache::new(PrecondKind::Ilu0);
    let (u_g, _) = lift_constraint(sys, &h, &opts(&p), &mut cache).unwrap();
    let scale = norm2(&sys.m.spmv(&u_g).unwrap());
    let au = norm2(&sys.a.spmv(&u_g).unwrap());
    let a_scale = sys.a.norm_inf() * norm2(&u_g);
    assert!(au <= 1e-7 * a_scale, "{au:e}");
    let coeff = h.coefficients(&sys.m.spmv(&u_g).unwrap());
    assert!(coeff.iter().all(|c| c.abs() <= 1e-7 * scale));
}

#[test]
fn example_one_matches_dense_kkt() {
    let p = Example::One.build(4, 42, GMode::Consistent).unwrap();
    let (u, _) = dense_kkt_solve(&p.system).unwrap();
    let o = SolveOptions {
        kind: Some(ProblemKind::Dim0CZeroTwoStage),
        ..opts(&p)
    };
    let s = solve(&p.system, &o).unwrap();
    assert!(rel_diff(&s.u, &u) <= 1e-8);
    assert!(s.final_residual <= 1e-10);
    // the recovered Bp balances the first equation
    let mut r = p.system.f.clone();
    let au = p.system.a.spmv(&s.u).unwrap();
    for i in 0..r.len() {
        r[i] -= s.bp[i] + au[i];
    }
    assert!(norm2(&r) <= 1e-9 * norm2(&p.system.f));
}

#[test]
fn manufactured_c1_load_matches_dense_kkt() {
    let mesh = build_mesh(&DomainSpec::new(Shape::Cube, 4)).unwrap();
    let p = assemble_system(&mesh, Problem::Maxwell, BoundaryCondition::Neumann, 1.0, None).unwrap();
    let w: Vec<f64> = (0..p.system.n()).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
    let f = p.system.a.spmv(&w).unwrap();
    let g = vec![0.0; p.system.n_constraints()];
    let p = p.with_rhs(f, g).unwrap();
    let (u, _) = dense_kkt_solve(&p.system).unwrap();
    for kind in [ProblemKind::Dim0CPos, ProblemKind::Dim0General] {
        let s = solve(&p.system, &SolveOptions { kind: Some(kind), ..opts(&p) }).unwrap();
        assert!(rel_diff(&s.u, &u) <= 1e-8, "{}", kind.name());
        assert_eq!(s.dim_c0, 0);
    }
}

#[test]
fn general_and_mass_paths_agree() {
    let mesh = build_mesh(&DomainSpec::new(Shape::Cube, 4)).unwrap();
    let p = assemble_system(&mesh, Problem::GradDiv, BoundaryCondition::Neumann, 1.0, None).unwrap();
    let (f, g) = p.make_rhs(13, GMode::Consistent).unwrap();
    let p = p.with_rhs(f, g).unwrap();
    let a = solve(&p.system, &SolveOptions { kind: Some(ProblemKind::Dim0General), ..opts(&p) }).unwrap();
    let b = solve(&p.system, &SolveOptions { kind: Some(ProblemKind::Dim0CPos), ..opts(&p) }).unwrap();
    assert!(rel_diff(&a.u, &b.u) <= 1e-8);
    assert!(rel_diff(&a.bp, &b.bp) <= 1e-8);
}

#[test]
fn two_alpha_matches_two_stage() {
    let p = Example::Four.build(4, 3, GMode::Consistent).unwrap();
    let a = solve(&p.system, &SolveOptions { kind: Some(ProblemKind::Dim0CZeroTwoStage), ..opts(&p) }).unwrap();
    let b = solve(&p.system, &SolveOptions { kind: Some(ProblemKind::Dim0CZeroTwoAlpha), ..opts(&p) }).unwrap();
    assert!(rel_diff(&a.u, &b.u) <= 1e-8);
    assert!(b.stage("alpha1").is_some() && b.stage("alpha2").is_some());
    assert!(mixed_residual(&p.system, &b.u, &b.bp).unwrap() <= 1e-8);
}

#[test]
fn full_and_light_agree() {
    for ex in [Example::Three, Example::Five] {
        let p = ex.build(4, 3, GMode::Consistent).unwrap();
        let h = basis(&p.system);
        let mut cache = PrecondCache::new(PrecondKind::Ilu0);
        let full = solve_equivalent(&p.system, ProblemKind::DimPosCPosFull, &h, &opts(&p), &mut cache).unwrap();
        let light = solve_equivalent(&p.system, ProblemKind::DimPosCPosLight, &h, &opts(&p), &mut cache).unwrap();
        assert!(rel_diff(&full.u, &light.u) <= 1e-8, "example {}", ex.number());
        assert!(full.constraint_defect <= 1e-8);
    }
}

#[test]
fn inadmissible_kind_is_rejected() {
    let p = Example::Three.build(4, 3, GMode::Consistent).unwrap();
    let h = basis(&p.system);
    let mut cache = PrecondCache::new(PrecondKind::Ilu0);
    assert!(solve_equivalent(&p.system, ProblemKind::Dim0CPos, &h, &opts(&p), &mut cache).is_err());
}

#[test]
fn solution_scales_with_the_load() {
    let p = Example::Five.build(4, 21, GMode::Consistent).unwrap();
    let base = solve(&p.system, &opts(&p)).unwrap();
    let f: Vec<f64> = p.system.f.iter().map(|v| 10.0 * v).collect();
    let g: Vec<f64> = p.system.g.iter().map(|v| 10.0 * v).collect();
    let sys = p.system.clone().with_rhs(f, g).unwrap();
    let scaled = solve(&sys, &opts(&p)).unwrap();
    let expect: Vec<f64> = base.u.iter().map(|v| 10.0 * v).collect();
    assert!(rel_diff(&scaled.u, &expect) <= 1e-8);
}

#[test]
fn bp_recovery_without_lift() {
    let p = Example::Two.build(4, 1, GMode::Zero).unwrap();
    let x: Vec<f64> = (0..p.system.n()).map(|i| (i as f64).cos()).collect();
    let bp = recover_bp(&p.system, &x, &vec![1.0; p.system.n()]).unwrap();
    assert_eq!(bp, p.system.bub_apply(&x).unwrap());
}

#[test]
fn inconsistent_residual_ignores_kernel_data() {
    let p = Example::Two.build(4, 4, GMode::Inconsistent(1e-2)).unwrap();
    let o = SolveOptions {
        metric: ResidualMetric::Inconsistent,
        ..opts(&p)
    };
    let s = solve(&p.system, &o).unwrap();
    assert!(s.final_residual <= 1e-9);
    assert!(inconsistent_residual(&p.system, &s.u, &s.bp).unwrap() <= 1e-9);
    let rel = s.constraint_defect;
    assert!((rel - 1e-2).abs() <= 2e-3, "{rel}");
    assert!(mixed_residual(&p.system, &s.u, &s.bp).unwrap() > 1e-4);
}

#[test]
fn penalty_error_decays_like_inverse_epsilon() {
    let p = Example::One.build(4, 42, GMode::Consistent).unwrap();
    let (u, _) = dense_kkt_solve(&p.system).unwrap();
    let cfg = PcgConfig { rel_tol: 1e-12, max_iter: 20000, record_trace: false };
    let run = |eps: f64| {
        let out = penalty_solve(&p.system, eps, PrecondKind::Ilu0, &cfg).unwrap();
        assert!(out.converged, "{eps:e} {:e} {}", out.residual, out.trace.iterations());
        rel_diff(&out.x, &u)
    };
    let e2 = run(1e2);
    let e4 = run(1e4);
    let slope = (e2 / e4).log10();
    assert!((slope - 2.0).abs() < 0.1, "{e2:e} {e4:e}");
}
