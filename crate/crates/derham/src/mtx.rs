//! Matrix Market coordinate files (`real` or `integer`, `general` or
//! `symmetric`).

use crate::error::{IoError, Result};
use derham_core::CsrMatrix;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
}

/// Parses a coordinate matrix; `name` labels error messages.
pub fn read_mtx<R: BufRead>(reader: R, name: &str) -> Result<CsrMatrix> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| IoError::parse(name, 1, "empty file"))?;
    let header = header.map_err(|e| IoError::parse(name, 1, e.to_string()))?;
    let symmetry = parse_header(&header).map_err(|m| IoError::parse(name, 1, m))?;

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut last = 1;
    for (idx, line) in lines {
        let lineno = idx + 1;
        last = lineno;
        let line = line.map_err(|e| IoError::parse(name, lineno, e.to_string()))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        let Some((nrows, ncols, nnz)) = size else {
            if fields.len() != 3 {
                return Err(IoError::parse(name, lineno, "expected `rows cols entries`"));
            }
            let v = parse_usizes(&fields).map_err(|m| IoError::parse(name, lineno, m))?;
            if symmetry == Symmetry::Symmetric && v[0] != v[1] {
                return Err(IoError::parse(name, lineno, "symmetric matrix must be square"));
            }
            size = Some((v[0], v[1], v[2]));
            triplets.reserve(v[2]);
            continue;
        };
        if fields.len() != 3 {
            return Err(IoError::parse(name, lineno, "expected `row col value`"));
        }
        if triplets.len() >= nnz * if symmetry == Symmetry::Symmetric { 2 } else { 1 } {
            return Err(IoError::parse(name, lineno, format!("more than {nnz} entries")));
        }
        let ij = parse_usizes(&fields[..2]).map_err(|m| IoError::parse(name, lineno, m))?;
        let (i, j) = (ij[0], ij[1]);
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(IoError::parse(
                name,
                lineno,
                format!("index ({i}, {j}) outside {nrows}x{ncols}"),
            ));
        }
        let v: f64 = fields[2]
            .parse()
            .map_err(|_| IoError::parse(name, lineno, format!("bad value `{}`", fields[2])))?;
        if !v.is_finite() {
            return Err(IoError::parse(name, lineno, "non-finite value"));
        }
        triplets.push((i - 1, j - 1, v));
        if symmetry == Symmetry::Symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
    }
    let (nrows, ncols, nnz) = size.ok_or_else(|| IoError::parse(name, 1, "missing size line"))?;
    let entries = match symmetry {
        Symmetry::General => triplets.len(),
        Symmetry::Symmetric => triplets.iter().filter(|(i, j, _)| i >= j).count(),
    };
    if entries != nnz {
        return Err(IoError::parse(
            name,
            last,
            format!("size line announces {nnz} entries, found {entries}"),
        ));
    }
    Ok(CsrMatrix::from_triplets(&triplets, nrows, ncols)?)
}

fn parse_header(line: &str) -> std::result::Result<Symmetry, String> {
    let f: Vec<String> = line.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if f.len() != 5 || f[0] != "%%matrixmarket" || f[1] != "matrix" {
        return Err("expected `%%MatrixMarket matrix coordinate real general|symmetric`".into());
    }
    if f[2] != "coordinate" {
        return Err(format!("unsupported format `{}`", f[2]));
    }
    if f[3] != "real" && f[3] != "integer" {
        return Err(format!("unsupported field `{}`", f[3]));
    }
    match f[4].as_str() {
        "general" => Ok(Symmetry::General),
        "symmetric" => Ok(Symmetry::Symmetric),
        other => Err(format!("unsupported symmetry `{other}`")),
    }
}

fn parse_usizes(fields: &[&str]) -> std::result::Result<Vec<usize>, String> {
    fields
        .iter()
        .map(|s| s.parse::<usize>().map_err(|_| format!("bad integer `{s}`")))
        .collect()
}

/// Writes `a`; with [`Symmetry::Symmetric`] only the lower triangle is
/// stored, so `a` must be exactly symmetric.
pub fn write_mtx<W: Write>(mut w: W, a: &CsrMatrix, symmetry: Symmetry) -> Result<()> {
    let io = |e: std::io::Error| IoError::Usage(format!("write failed: {e}"));
    let triplets: Vec<_> = match symmetry {
        Symmetry::General => a.to_triplets(),
        Symmetry::Symmetric => {
            if a.symmetry_defect() != 0.0 {
                return Err(IoError::Usage("matrix is not exactly symmetric".into()));
            }
            a.to_triplets().into_iter().filter(|(i, j, _)| i >= j).collect()
        }
    };
    let kind = match symmetry {
        Symmetry::General => "general",
        Symmetry::Symmetric => "symmetric",
    };
    writeln!(w, "%%MatrixMarket matrix coordinate real {kind}").map_err(io)?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), triplets.len()).map_err(io)?;
    for (i, j, v) in triplets {
        writeln!(w, "{} {} {v:.17e}", i + 1, j + 1).map_err(io)?;
    }
    Ok(())
}

pub fn read_mtx_file(path: &Path) -> Result<CsrMatrix> {
    let f = File::open(path).map_err(|e| IoError::file(path, e))?;
    read_mtx(BufReader::new(f), &path.display().to_string())
}

/// Writes `a`, using the symmetric layout when `a` is exactly symmetric.
pub fn write_mtx_file(path: &Path, a: &CsrMatrix) -> Result<()> {
    let f = File::create(path).map_err(|e| IoError::file(path, e))?;
    let symmetry = if a.nrows() == a.ncols() && a.symmetry_defect() == 0.0 {
        Symmetry::Symmetric
    } else {
        Symmetry::General
    };
    let mut w = BufWriter::new(f);
    write_mtx(&mut w, a, symmetry)?;
    w.flush().map_err(|e| IoError::file(path, e))
}
