//! A constrained system on disk: Matrix Market matrices, vector files and a
//! `system.txt` manifest tying them together.

use crate::error::{IoError, Result};
use crate::kv::read_kv_file;
use crate::mtx::{read_mtx_file, write_mtx_file};
use crate::vecio::{read_vec_file, write_vec_file};
use derham_core::fem::{AssembledProblem, FormDegree};
use derham_core::{ConstrainedSystem, Weight};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const MANIFEST: &str = "system.txt";

/// Manifest entries that do not describe the system itself.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BundleMeta {
    pub expected_dim_c0: Option<usize>,
    pub description: Option<String>,
}

pub fn export_system(dir: &Path, sys: &ConstrainedSystem, meta: &BundleMeta) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    write_mtx_file(&dir.join("A.mtx"), &sys.a)?;
    write_mtx_file(&dir.join("B.mtx"), &sys.b)?;
    write_mtx_file(&dir.join("M.mtx"), &sys.m)?;
    write_vec_file(&dir.join("F.vec"), &sys.f)?;
    write_vec_file(&dir.join("G.vec"), &sys.g)?;
    let mut m = String::new();
    if let Some(d) = &meta.description {
        let _ = writeln!(m, "description = {d}");
    }
    let _ = writeln!(m, "a = A.mtx\nb = B.mtx\nm = M.mtx\nf = F.vec\ng = G.vec");
    let _ = writeln!(m, "c = {:.17e}", sys.c);
    match &sys.u {
        Weight::Scalar(a) => {
            let _ = writeln!(m, "u_scalar = {a:.17e}");
        }
        Weight::Diagonal(d) => {
            write_vec_file(&dir.join("U.vec"), d)?;
            let _ = writeln!(m, "u_diagonal = U.vec");
        }
        Weight::Matrix(u) => {
            write_mtx_file(&dir.join("U.mtx"), u)?;
            let _ = writeln!(m, "u_matrix = U.mtx");
        }
    }
    if let Some(d) = meta.expected_dim_c0 {
        let _ = writeln!(m, "expected_dim_c0 = {d}");
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, m).map_err(|e| IoError::file(path, e))
}

/// Also writes the degree-of-freedom maps and a mesh header next to the
/// system files.
pub fn export_problem(dir: &Path, p: &AssembledProblem, meta: &BundleMeta) -> Result<()> {
    export_system(dir, &p.system, meta)?;
    let mut dofs = String::from("dof,entity\n");
    for (i, e) in p.kept_u.iter().enumerate() {
        let _ = writeln!(dofs, "{i},{e}");
    }
    write_text(&dir.join("dofs_u.csv"), &dofs)?;
    let mut dofs = String::from("dof,entity\n");
    for (i, e) in p.kept_p.iter().enumerate() {
        let _ = writeln!(dofs, "{i},{e}");
    }
    write_text(&dir.join("dofs_p.csv"), &dofs)?;
    let mesh = &p.mesh;
    let counts = [
        FormDegree::Node,
        FormDegree::Edge,
        FormDegree::Face,
        FormDegree::Cell,
    ]
    .map(|d| mesh.count(d));
    let header = format!(
        "shape = {}\nn = {}\nh = {:.17e}\nproblem = {}\nbc = {}\nnodes = {}\nedges = {}\nfaces = {}\ncells = {}\ninactive_cells = {}\n",
        mesh.shape.name(),
        mesh.n,
        mesh.h,
        p.problem.name(),
        p.bc.name(),
        counts[0],
        counts[1],
        counts[2],
        counts[3],
        mesh.inactive_cells()
    );
    write_text(&dir.join("mesh.txt"), &header)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| IoError::file(path, e))
}

pub fn import_system(dir: &Path) -> Result<(ConstrainedSystem, BundleMeta)> {
    let manifest = dir.join(MANIFEST);
    let kv = read_kv_file(&manifest)?;
    let field = |k: &str| -> Result<PathBuf> {
        kv.get(k)
            .map(|v| dir.join(v))
            .ok_or_else(|| IoError::MissingField {
                path: manifest.clone(),
                field: k.to_string(),
            })
    };
    let bad = |k: &str, v: &str| IoError::Usage(format!("{}: bad value `{v}` for `{k}`", manifest.display()));
    let a = read_mtx_file(&field("a")?)?;
    let b = read_mtx_file(&field("b")?)?;
    let m = read_mtx_file(&field("m")?)?;
    let f = read_vec_file(&field("f")?)?;
    let g = read_vec_file(&field("g")?)?;
    let c: f64 = match kv.get("c") {
        Some(v) => v.parse().map_err(|_| bad("c", v))?,
        None => {
            return Err(IoError::MissingField {
                path: manifest.clone(),
                field: "c".into(),
            })
        }
    };
    let u = if let Some(v) = kv.get("u_scalar") {
        Weight::Scalar(v.parse().map_err(|_| bad("u_scalar", v))?)
    } else if kv.contains_key("u_diagonal") {
        Weight::Diagonal(Arc::new(read_vec_file(&field("u_diagonal")?)?))
    } else if kv.contains_key("u_matrix") {
        Weight::Matrix(Arc::new(read_mtx_file(&field("u_matrix")?)?))
    } else {
        return Err(IoError::MissingField {
            path: manifest.clone(),
            field: "u_scalar".into(),
        });
    };
    let expected_dim_c0 = match kv.get("expected_dim_c0") {
        Some(v) => Some(v.parse().map_err(|_| bad("expected_dim_c0", v))?),
        None => None,
    };
    let sys = ConstrainedSystem::new(a, b, m, u, c, f, g)?;
    Ok((
        sys,
        BundleMeta {
            expected_dim_c0,
            description: kv.get("description").cloned(),
        },
    ))
}
