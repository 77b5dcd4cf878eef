//! Whitespace-separated vectors, one value per line on output.

use crate::error::{IoError, Result};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Reads every whitespace-separated number; lines starting with `#` or `%`
/// are comments.
pub fn read_vec<R: BufRead>(reader: R, name: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| IoError::parse(name, idx + 1, e.to_string()))?;
        let t = line.trim();
        if t.starts_with('#') || t.starts_with('%') {
            continue;
        }
        for tok in t.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| IoError::parse(name, idx + 1, format!("bad value `{tok}`")))?;
            if !v.is_finite() {
                return Err(IoError::parse(name, idx + 1, "non-finite value"));
            }
            out.push(v);
        }
    }
    Ok(out)
}

pub fn write_vec<W: Write>(mut w: W, x: &[f64]) -> std::io::Result<()> {
    for v in x {
        writeln!(w, "{v:.17e}")?;
    }
    Ok(())
}

pub fn read_vec_file(path: &Path) -> Result<Vec<f64>> {
    let f = File::open(path).map_err(|e| IoError::file(path, e))?;
    read_vec(BufReader::new(f), &path.display().to_string())
}

pub fn write_vec_file(path: &Path, x: &[f64]) -> Result<()> {
    let f = File::create(path).map_err(|e| IoError::file(path, e))?;
    let mut w = BufWriter::new(f);
    write_vec(&mut w, x)
        .and_then(|_| w.flush())
        .map_err(|e| IoError::file(path, e))
}
