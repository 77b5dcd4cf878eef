//! Discrete de Rham complexes on cubic meshes and well-posed solvers for the
//! constrained saddle-point systems they produce:
//!
//! ```text
//! (A + cM) u + B p = F
//!          Bᵀ u    = G
//! ```
//!
//! The system is never solved as an indefinite block matrix. Instead it is
//! replaced by a short sequence of symmetric positive (semi-)definite solves
//! whose output equals the `u` component, even when `B` is rank deficient or
//! the harmonic space `Ker A ∩ Ker BUBᵀ` is nontrivial.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the command
//! line front end live in the `derham` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod constrained;
pub mod dense;
mod error;
pub mod fem;
pub mod operator;
pub mod oracle;
pub mod precond;
pub mod rng;
pub mod solvers;
pub mod sparse;
pub mod vector;

pub use constrained::{
    ConstrainedSystem, HarmonicBasis, ProblemKind, ResidualMetric, Solution, SolveOptions,
};
pub use error::{Error, Result};
pub use operator::{OperatorExpr, Weight};
pub use precond::{Ilu0Factors, PrecondKind, Preconditioner};
pub use solvers::{IterationTrace, LobpcgConfig, PcgConfig};
pub use sparse::CsrMatrix;
