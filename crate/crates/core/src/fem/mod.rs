//! Lowest-order node, edge, face and cell elements on uniform cubic meshes
//! and assembly of the Maxwell (`k = 1`) and grad-div (`k = 2`) systems.
//!
//! Every operator is built from incidence matrices and mass matrices,
//! `A = Dₖᵀ Mₖ₊₁ Dₖ` and `B = Mₖ Dₖ₋₁`, so `A Mₖ⁻¹ B = Dₖᵀ Mₖ₊₁ Dₖ Dₖ₋₁ = 0`
//! holds by construction.
//!
//! Basis functions are scaled so that the degrees of freedom are the
//! circulation along an edge, the flux through a face and the integral over
//! a cell. With this scaling the incidence matrices are exactly the matrices
//! of `grad`, `curl` and `div`; in particular the cell basis function is
//! `1/h³` on its cell, so the cell mass is `1/h³`.

mod mass;
mod mesh;

pub use mass::assemble_mass;
pub use mesh::{
    build_mesh, incidence, CellEntities, DomainSpec, FormDegree, IncidenceMatrices, Shape,
    StructuredMesh,
};

use crate::constrained::ConstrainedSystem;
use crate::error::{Error, Result};
use crate::operator::Weight;
use crate::rng;
use crate::sparse::CsrMatrix;
use crate::vector;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    /// `curl curl u + c u + grad p = f`, `div u = g` on edge elements.
    Maxwell,
    /// `−grad div u + c u + curl p = f` on face elements, edge multiplier.
    GradDiv,
}

impl Problem {
    /// Degree `k` of the unknown `u`.
    pub fn degree(self) -> FormDegree {
        match self {
            Problem::Maxwell => FormDegree::Edge,
            Problem::GradDiv => FormDegree::Face,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Problem::Maxwell => "maxwell",
            Problem::GradDiv => "graddiv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "maxwell" => Some(Problem::Maxwell),
            "graddiv" | "grad-div" => Some(Problem::GradDiv),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// Tangential traces of `u` and traces of `p` vanish; the boundary
    /// degrees of freedom are eliminated.
    Dirichlet,
    /// Natural conditions; every degree of freedom is kept.
    Neumann,
}

impl BoundaryCondition {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dirichlet" => Some(BoundaryCondition::Dirichlet),
            "neumann" => Some(BoundaryCondition::Neumann),
            _ => None,
        }
    }
}

/// How the constraint datum `G` is generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GMode {
    Zero,
    /// `G = Bᵀ w` for a random `w`.
    Consistent,
    /// Consistent `G` plus a `Ker B` component of relative size `rel`.
    Inconsistent(f64),
}

/// A mesh, its assembled constrained system and the bookkeeping needed to
/// map between retained degrees of freedom and the mesh.
#[derive(Debug, Clone)]
pub struct AssembledProblem {
    pub mesh: StructuredMesh,
    pub problem: Problem,
    pub bc: BoundaryCondition,
    pub system: ConstrainedSystem,
    /// Active-entity indices of the retained degree-`k` unknowns.
    pub kept_u: Vec<usize>,
    /// Active-entity indices of the retained degree-`k−1` multipliers.
    pub kept_p: Vec<usize>,
    /// Mass matrix of the multiplier space on the retained multipliers.
    pub mass_p: CsrMatrix,
    /// `Dₖ₋₁` restricted to retained rows and columns.
    pub d_prev: CsrMatrix,
    /// `Dₖ₋₂` into the retained multipliers, when `k ≥ 2`.
    pub d_prev2: Option<CsrMatrix>,
}

impl AssembledProblem {
    /// `dim C₀` predicted by the topology of the domain.
    pub fn predicted_dim_c0(&self) -> usize {
        if self.bc == BoundaryCondition::Dirichlet {
            // relative cohomology; only the plain cube is used with Dirichlet
            return 0;
        }
        let (b1, b2) = self.mesh.shape.betti();
        match self.problem {
            Problem::Maxwell => b1,
            Problem::GradDiv => b2,
        }
    }

    /// Seeded right-hand sides: `F` uniform on `[−1, 1]`, `G` per `mode`.
    pub fn make_rhs(&self, seed: u64, mode: GMode) -> Result<(Vec<f64>, Vec<f64>)> {
        let sys = &self.system;
        let mut r = rng::seeded(seed);
        let f = rng::uniform_vec(&mut r, sys.n());
        let g = match mode {
            GMode::Zero => vec![0.0; sys.n_constraints()],
            GMode::Consistent => {
                let w = rng::uniform_vec(&mut r, sys.n());
                sys.b.spmv_t(&w)?
            }
            GMode::Inconsistent(rel) => {
                let w = rng::uniform_vec(&mut r, sys.n());
                let gc = sys.b.spmv_t(&w)?;
                let mut z = self.kernel_b_vector(&mut r)?;
                let s = rel * vector::norm2(&gc) / vector::norm2(&z);
                vector::scale(s, &mut z);
                vector::add(&gc, &z)
            }
        };
        Ok((f, g))
    }

    /// Assembled problem with the given right-hand sides.
    pub fn with_rhs(mut self, f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        self.system = self.system.with_rhs(f, g)?;
        Ok(self)
    }

    /// A nonzero element of `Ker B = Ker Dₖ₋₁`: constants on the nodes for
    /// Maxwell with natural conditions, a random gradient for grad-div.
    fn kernel_b_vector(&self, r: &mut rng::SeededRng) -> Result<Vec<f64>> {
        match (&self.d_prev2, self.problem, self.bc) {
            (Some(d2), _, _) => {
                let q = rng::uniform_vec(r, d2.ncols());
                d2.spmv(&q)
            }
            (None, Problem::Maxwell, BoundaryCondition::Neumann) => {
                Ok(vec![1.0; self.system.n_constraints()])
            }
            _ => Err(Error::Unsupported(
                "the constraint operator has a trivial kernel; no inconsistent datum exists".into(),
            )),
        }
    }
}

/// Assembles the constrained system for `problem` on `mesh`.
///
/// `u_scale` is the `α` of `U = α I`; `None` selects `5/h³`.
pub fn assemble_system(
    mesh: &StructuredMesh,
    problem: Problem,
    bc: BoundaryCondition,
    c: f64,
    u_scale: Option<f64>,
) -> Result<AssembledProblem> {
    if !(c >= 0.0) {
        return Err(Error::Config(format!("c must be nonnegative, got {c}")));
    }
    let k = problem.degree();
    let km1 = FormDegree::from_index(k as usize - 1).expect("k >= 1");
    let kp1 = FormDegree::from_index(k as usize + 1).expect("k <= 2");
    let inc = incidence(mesh);
    let d_k = inc.d(k).expect("k <= 2");
    let d_km1 = inc.d(km1).expect("k >= 1");

    let (kept_u, kept_p) = match bc {
        BoundaryCondition::Neumann => (
            (0..mesh.count(k)).collect::<Vec<_>>(),
            (0..mesh.count(km1)).collect::<Vec<_>>(),
        ),
        BoundaryCondition::Dirichlet => {
            let masks = mesh.boundary_masks();
            let interior = |d: FormDegree| -> Vec<usize> {
                mesh.active(d)
                    .iter()
                    .enumerate()
                    .filter(|(_, &lat)| !masks[d as usize][lat])
                    .map(|(local, _)| local)
                    .collect()
            };
            (interior(k), interior(km1))
        }
    };
    let all_next: Vec<usize> = (0..mesh.count(kp1)).collect();

    let m_k = assemble_mass(mesh, k).submatrix(&kept_u, &kept_u)?;
    let m_kp1 = assemble_mass(mesh, kp1);
    let m_km1 = assemble_mass(mesh, km1).submatrix(&kept_p, &kept_p)?;
    let dk = d_k.submatrix(&all_next, &kept_u)?;
    let dkm1 = d_km1.submatrix(&kept_u, &kept_p)?;

    let a = dk.transpose().matmul(&m_kp1.matmul(&dk)?)?;
    let a = symmetrized(&a)?;
    let b = m_k.matmul(&dkm1)?;
    let alpha = u_scale.unwrap_or(5.0 / (mesh.h * mesh.h * mesh.h));

    let d_prev2 = if k == FormDegree::Face {
        let all_nodes: Vec<usize> = match bc {
            BoundaryCondition::Neumann => (0..mesh.count(FormDegree::Node)).collect(),
            BoundaryCondition::Dirichlet => {
                let masks = mesh.boundary_masks();
                mesh.active(FormDegree::Node)
                    .iter()
                    .enumerate()
                    .filter(|(_, &lat)| !masks[0][lat])
                    .map(|(l, _)| l)
                    .collect()
            }
        };
        Some(inc.grad.submatrix(&kept_p, &all_nodes)?)
    } else {
        None
    };

    let n = kept_u.len();
    let mc = kept_p.len();
    let system = ConstrainedSystem::new(
        a,
        b,
        m_k,
        Weight::Scalar(alpha),
        c,
        vec![0.0; n],
        vec![0.0; mc],
    )?;
    Ok(AssembledProblem {
        mesh: mesh.clone(),
        problem,
        bc,
        system,
        kept_u,
        kept_p,
        mass_p: m_km1,
        d_prev: dkm1,
        d_prev2,
    })
}

/// Removes the round-off asymmetry of a Galerkin triple product.
fn symmetrized(a: &CsrMatrix) -> Result<CsrMatrix> {
    a.add_scaled(0.5, &a.transpose(), 0.5)
}

/// The five reference configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    /// Maxwell, cube, Dirichlet, `c = 0`.
    One,
    /// Maxwell, cube, natural conditions, `c = 0`.
    Two,
    /// Maxwell, cube with a tunnel, natural conditions, `c = 1`.
    Three,
    /// Grad-div, cube, natural conditions, `c = 0`.
    Four,
    /// Grad-div, cube with a void, natural conditions, `c = 1`.
    Five,
}

impl Example {
    pub const ALL: [Example; 5] = [
        Example::One,
        Example::Two,
        Example::Three,
        Example::Four,
        Example::Five,
    ];

    pub fn from_number(i: usize) -> Option<Self> {
        Self::ALL.get(i.checked_sub(1)?).copied()
    }

    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn shape(self) -> Shape {
        match self {
            Example::Three => Shape::CubeTunnel,
            Example::Five => Shape::CubeVoid,
            _ => Shape::Cube,
        }
    }

    pub fn problem(self) -> Problem {
        match self {
            Example::One | Example::Two | Example::Three => Problem::Maxwell,
            Example::Four | Example::Five => Problem::GradDiv,
        }
    }

    pub fn bc(self) -> BoundaryCondition {
        match self {
            Example::One => BoundaryCondition::Dirichlet,
            _ => BoundaryCondition::Neumann,
        }
    }

    pub fn c(self) -> f64 {
        match self {
            Example::Three | Example::Five => 1.0,
            _ => 0.0,
        }
    }

    /// Assembles the example with `n` cells per axis (no right-hand side).
    pub fn assemble(self, n: usize) -> Result<AssembledProblem> {
        let mesh = build_mesh(&DomainSpec::new(self.shape(), n))?;
        assemble_system(&mesh, self.problem(), self.bc(), self.c(), None)
    }

    /// Assembles the example and attaches seeded right-hand sides.
    pub fn build(self, n: usize, seed: u64, mode: GMode) -> Result<AssembledProblem> {
        let p = self.assemble(n)?;
        let (f, g) = p.make_rhs(seed, mode)?;
        p.with_rhs(f, g)
    }
}
