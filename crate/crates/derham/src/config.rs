//! Run settings gathered from an optional `key = value` file and command
//! line flags, flags taking precedence.

use crate::error::{IoError, Result};
use derham_core::constrained::ProblemKind;
use derham_core::fem::{
    assemble_system, build_mesh, AssembledProblem, BoundaryCondition, DomainSpec, Example, GMode,
    Problem, Shape,
};
use derham_core::{PrecondKind, ResidualMetric, SolveOptions};
use std::collections::BTreeMap;
use std::path::PathBuf;

pub const OUT_ENV: &str = "DERHAM_OUT";
pub const DEFAULT_OUT: &str = "derham-out";

/// Every key understood in a settings file.
pub const KEYS: &[&str] = &[
    "example",
    "n",
    "seed",
    "shape",
    "problem",
    "bc",
    "c",
    "u_scale",
    "g",
    "kind",
    "precond",
    "metric",
    "alpha1",
    "alpha2",
    "intermediate_tol",
    "final_tol",
    "max_iter",
    "eig_tol",
    "check_oracle",
    "eps",
    "reference",
    "out",
];

/// Raw settings; later layers overwrite earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn from_map(values: BTreeMap<String, String>, name: &str) -> Result<Self> {
        if let Some(k) = values.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(IoError::Usage(format!("{name}: unknown key `{k}`")));
        }
        Ok(Self { values })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        debug_assert!(KEYS.contains(&key), "{key}");
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn set_opt<T: ToString>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| IoError::Usage(format!("bad value `{v}` for `{key}`"))),
        }
    }

    fn named<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => parse(v)
                .map(Some)
                .ok_or_else(|| IoError::Usage(format!("unknown {key} `{v}`"))),
        }
    }
}

/// Which discrete problem to assemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub example: Option<Example>,
    pub shape: Shape,
    pub problem: Problem,
    pub bc: BoundaryCondition,
    pub c: f64,
    pub u_scale: Option<f64>,
    pub n: usize,
    pub seed: u64,
    pub g_mode: GMode,
}

impl ProblemSpec {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let example = match s.parsed::<usize>("example")? {
            Some(i) => Some(
                Example::from_number(i)
                    .ok_or_else(|| IoError::Usage(format!("no example {i}; choose 1 to 5")))?,
            ),
            None => None,
        };
        let shape = s.named("shape", Shape::parse)?.or(example.map(Example::shape));
        let problem = s.named("problem", Problem::parse)?.or(example.map(Example::problem));
        let bc = s.named("bc", BoundaryCondition::parse)?.or(example.map(Example::bc));
        let c = s.parsed::<f64>("c")?.or(example.map(Example::c));
        let (Some(shape), Some(problem), Some(bc), Some(c)) = (shape, problem, bc, c) else {
            return Err(IoError::Usage(
                "give --example or all of --shape, --problem, --bc and --c".into(),
            ));
        };
        Ok(Self {
            example,
            shape,
            problem,
            bc,
            c,
            u_scale: s.parsed("u_scale")?,
            n: s.parsed("n")?.unwrap_or(8),
            seed: s.parsed("seed")?.unwrap_or(42),
            g_mode: match s.get("g") {
                None => GMode::Consistent,
                Some(v) => parse_g_mode(v)?,
            },
        })
    }

    /// Assembles the system and fills in the seeded right-hand sides.
    pub fn build(&self) -> Result<AssembledProblem> {
        let mesh = build_mesh(&DomainSpec::new(self.shape, self.n))?;
        let p = assemble_system(&mesh, self.problem, self.bc, self.c, self.u_scale)?;
        let (f, g) = p.make_rhs(self.seed, self.g_mode)?;
        Ok(p.with_rhs(f, g)?)
    }

    pub fn label(&self) -> String {
        match self.example {
            Some(e) => format!("example {}", e.number()),
            None => format!(
                "{} {} {} c={}",
                self.problem.name(),
                self.shape.name(),
                self.bc.name(),
                self.c
            ),
        }
    }
}

/// `zero`, `consistent` or `inconsistent:<relative size>`.
pub fn parse_g_mode(s: &str) -> Result<GMode> {
    match s {
        "zero" => Ok(GMode::Zero),
        "consistent" => Ok(GMode::Consistent),
        _ => {
            let rel = s
                .strip_prefix("inconsistent:")
                .and_then(|r| r.parse::<f64>().ok())
                .filter(|r| *r > 0.0 && r.is_finite());
            rel.map(GMode::Inconsistent).ok_or_else(|| {
                IoError::Usage(format!(
                    "bad g mode `{s}`; use zero, consistent or inconsistent:<rel>"
                ))
            })
        }
    }
}

pub fn g_mode_name(g: GMode) -> String {
    match g {
        GMode::Zero => "zero".into(),
        GMode::Consistent => "consistent".into(),
        GMode::Inconsistent(r) => format!("inconsistent:{r}"),
    }
}

/// Solver settings shared by `run`, `import` and `penalty-sweep`.
pub fn solve_options(s: &Settings) -> Result<SolveOptions> {
    let mut o = SolveOptions {
        kind: s.named("kind", ProblemKind::parse)?,
        ..Default::default()
    };
    if let Some(p) = s.named("precond", PrecondKind::parse)? {
        o.precond = p;
    }
    if let Some(m) = s.named("metric", ResidualMetric::parse)? {
        o.metric = m;
    }
    match (s.parsed::<f64>("alpha1")?, s.parsed::<f64>("alpha2")?) {
        (Some(a1), Some(a2)) => o.alphas = Some((a1, a2)),
        (None, None) => {}
        _ => return Err(IoError::Usage("give both alpha1 and alpha2".into())),
    }
    if let Some(t) = s.parsed("intermediate_tol")? {
        o.intermediate_tol = t;
    }
    if let Some(t) = s.parsed("final_tol")? {
        o.final_tol = t;
    }
    if let Some(m) = s.parsed("max_iter")? {
        o.max_iter = m;
    }
    if let Some(t) = s.parsed("eig_tol")? {
        o.lobpcg.rel_tol = t;
    }
    Ok(o)
}

pub fn out_dir(s: &Settings) -> PathBuf {
    s.get("out")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn check_oracle(s: &Settings) -> Result<bool> {
    Ok(s.parsed("check_oracle")?.unwrap_or(false))
}

/// Comma-separated penalty parameters; an empty list is an error.
pub fn eps_list(s: &Settings) -> Result<Vec<f64>> {
    let raw = s.get("eps").unwrap_or("");
    let eps: Vec<f64> = raw
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|e| *e > 0.0 && e.is_finite())
                .ok_or_else(|| IoError::Usage(format!("bad penalty parameter `{t}`")))
        })
        .collect::<Result<_>>()?;
    if eps.is_empty() {
        return Err(IoError::Usage("the penalty parameter list is empty".into()));
    }
    Ok(eps)
}
