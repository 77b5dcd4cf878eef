use clap::{Args, Parser, Subcommand};
use derham::bundle::{export_problem, import_system, BundleMeta};
use derham::config::{
    check_oracle, eps_list, g_mode_name, out_dir, solve_options, ProblemSpec, Settings,
};
use derham::kv::read_kv_file;
use derham::run::{check_system, penalty_sweep, solve_to_dir, Reference, COMPLEX_TOL};
use derham::{IoError, Result};
use derham_core::constrained::verify_complex_property;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Solve constrained saddle-point systems from discrete de Rham complexes.
#[derive(Parser)]
#[command(name = "derham", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a problem, solve it and write the results.
    Run {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Compare against a dense solve of the full saddle-point system.
        #[arg(long)]
        check_oracle: bool,
    },
    /// Compare penalty approximations with the exact solution.
    PenaltySweep {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated penalty parameters.
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<String>,
        /// Exact solution source: auto, oracle or equivalent.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Write an assembled problem as Matrix Market files plus a manifest.
    Export {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve a system read from an exported directory.
    Import {
        /// Directory holding `system.txt`.
        dir: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        check_oracle: bool,
        /// Solve even if the complex property does not hold.
        #[arg(long)]
        force: bool,
    },
    /// Report the complex property, harmonic space and path agreement.
    Check {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Check an exported directory instead of an assembled problem.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// `key = value` settings file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: $DERHAM_OUT or ./derham-out].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProblemArgs {
    /// Preset 1 to 5.
    #[arg(long)]
    example: Option<usize>,
    /// Cells per side.
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// cube, tunnel or void.
    #[arg(long)]
    shape: Option<String>,
    /// maxwell or graddiv.
    #[arg(long)]
    problem: Option<String>,
    /// dirichlet or neumann.
    #[arg(long)]
    bc: Option<String>,
    #[arg(long)]
    c: Option<f64>,
    /// Scalar weight U; defaults to 5/h³.
    #[arg(long)]
    u_scale: Option<f64>,
    /// zero, consistent or inconsistent:<rel>.
    #[arg(long)]
    g: Option<String>,
}

#[derive(Args)]
struct SolverArgs {
    /// Equivalent problem; chosen from dim C0 and c when omitted.
    #[arg(long)]
    kind: Option<String>,
    /// ilu0, ilu0-natural, jacobi or none.
    #[arg(long)]
    precond: Option<String>,
    /// mixed, inconsistent or stage.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    intermediate_tol: Option<f64>,
    #[arg(long)]
    final_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    eig_tol: Option<f64>,
}

impl CommonArgs {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::from_map(read_kv_file(path)?, &path.display().to_string())?,
            None => Settings::default(),
        };
        s.set_opt("out", self.out.as_ref().map(|p| p.display()));
        Ok(s)
    }
}

impl ProblemArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("example", self.example);
        s.set_opt("n", self.n);
        s.set_opt("seed", self.seed);
        s.set_opt("shape", self.shape.as_ref());
        s.set_opt("problem", self.problem.as_ref());
        s.set_opt("bc", self.bc.as_ref());
        s.set_opt("c", self.c);
        s.set_opt("u_scale", self.u_scale);
        s.set_opt("g", self.g.as_ref());
    }

    fn is_empty(&self) -> bool {
        self.example.is_none() && self.shape.is_none() && self.problem.is_none()
    }
}

impl SolverArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("kind", self.kind.as_ref());
        s.set_opt("precond", self.precond.as_ref());
        s.set_opt("metric", self.metric.as_ref());
        s.set_opt("alpha1", self.alpha1);
        s.set_opt("alpha2", self.alpha2);
        s.set_opt("intermediate_tol", self.intermediate_tol);
        s.set_opt("final_tol", self.final_tol);
        s.set_opt("max_iter", self.max_iter);
        s.set_opt("eig_tol", self.eig_tol);
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run {
            problem,
            solver,
            common,
            check_oracle: oracle,
        } => {
            let mut s = common.settings()?;
            problem.apply(&mut s);
            solver.apply(&mut s);
            if oracle {
                s.set("check_oracle", true);
            }
            let spec = ProblemSpec::from_settings(&s)?;
            let p = spec.build()?;
            let mut opts = solve_options(&s)?;
            opts.expected_dim_c0 = Some(p.predicted_dim_c0());
            let label = format!("{} n={} seed={} g={}", spec.label(), spec.n, spec.seed, g_mode_name(spec.g_mode));
            let out = out_dir(&s);
            let (_, report) = solve_to_dir(&p.system, &opts, &label, check_oracle(&s)?, &out)?;
            print!("{}", report.summary());
            Ok(report.success())
        }
        Command::PenaltySweep {
            problem,
            solver,
            common,
            eps,
            reference,
        } => {
            let mut s = common.settings()?;
            problem.apply(&mut s);
            solver.apply(&mut s);
            s.set_opt("eps", eps);
            s.set_opt("reference", reference);
            let eps = eps_list(&s)?;
            let reference = match s.get("reference") {
                None => Reference::Auto,
                Some(r) => Reference::parse(r)
                    .ok_or_else(|| IoError::Usage(format!("unknown reference `{r}`")))?,
            };
            let p = ProblemSpec::from_settings(&s)?.build()?;
            let opts = solve_options(&s)?;
            let report = penalty_sweep(&p, &eps, reference, &opts)?;
            report.write_csv(&out_dir(&s))?;
            println!("reference = {}", report.reference);
            for (e, err, ok) in &report.points {
                let note = if *ok { "" } else { " (not converged)" };
                println!("epsilon = {e:e}  error = {err:.3e}{note}");
            }
            println!("shape = {}", report.shape.name());
            Ok(true)
        }
        Command::Export { problem, common } => {
            let mut s = common.settings()?;
            problem.apply(&mut s);
            let spec = ProblemSpec::from_settings(&s)?;
            let p = spec.build()?;
            let meta = BundleMeta {
                expected_dim_c0: Some(p.predicted_dim_c0()),
                description: Some(spec.label()),
            };
            let out = out_dir(&s);
            export_problem(&out, &p, &meta)?;
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Import {
            dir,
            solver,
            common,
            check_oracle: oracle,
            force,
        } => {
            let mut s = common.settings()?;
            solver.apply(&mut s);
            if oracle {
                s.set("check_oracle", true);
            }
            let (sys, meta) = import_system(&dir)?;
            let defect = verify_complex_property(&sys, 5, 7)?;
            if defect > COMPLEX_TOL {
                eprintln!("warning: A M^-1 B has relative size {defect:.3e}");
                if !force {
                    return Err(IoError::Usage(
                        "the system does not satisfy A M^-1 B = 0; pass --force to solve anyway"
                            .into(),
                    ));
                }
            }
            let mut opts = solve_options(&s)?;
            opts.expected_dim_c0 = meta.expected_dim_c0;
            let label = meta
                .description
                .clone()
                .unwrap_or_else(|| dir.display().to_string());
            let (_, report) = solve_to_dir(&sys, &opts, &label, check_oracle(&s)?, &out_dir(&s))?;
            print!("{}", report.summary());
            Ok(report.success())
        }
        Command::Check {
            problem,
            solver,
            common,
            bundle,
        } => {
            let mut s = common.settings()?;
            problem.apply(&mut s);
            solver.apply(&mut s);
            let mut opts = solve_options(&s)?;
            let sys = match bundle.as_deref() {
                Some(dir) => load_bundle(dir, &mut opts)?,
                None => {
                    if problem.is_empty() && s.get("example").is_none() && s.get("shape").is_none() {
                        return Err(IoError::Usage("give --example, a problem or --bundle".into()));
                    }
                    let p = ProblemSpec::from_settings(&s)?.build()?;
                    opts.expected_dim_c0 = Some(p.predicted_dim_c0());
                    p.system
                }
            };
            let report = check_system(&sys, &opts, 5, 7)?;
            print!("{}", report.text());
            Ok(report.ok())
        }
    }
}

fn load_bundle(dir: &Path, opts: &mut derham_core::SolveOptions) -> Result<derham_core::ConstrainedSystem> {
    let (sys, meta) = import_system(dir)?;
    opts.expected_dim_c0 = meta.expected_dim_c0;
    Ok(sys)
}
