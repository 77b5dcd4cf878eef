//! Convergence traces as CSV with the header `stage,iter,residual`.

use crate::error::{IoError, Result};
use derham_core::IterationTrace;
use std::io::Write;

pub const HEADER: &str = "stage,iter,residual";

pub fn write_trace<W: Write>(mut w: W, stage: &str, trace: &IterationTrace) -> std::io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for (i, r) in trace.residuals.iter().enumerate() {
        writeln!(w, "{stage},{i},{r:.17e}")?;
    }
    Ok(())
}

/// Parses a trace written by [`write_trace`], returning the stage name.
pub fn read_trace(text: &str, name: &str) -> Result<(String, IterationTrace)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(IoError::parse(name, 1, format!("expected header `{HEADER}`"))),
    }
    let mut stage = String::new();
    let mut trace = IterationTrace::default();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(IoError::parse(name, lineno, "expected three columns"));
        }
        if stage.is_empty() {
            stage = f[0].to_string();
        } else if stage != f[0] {
            return Err(IoError::parse(name, lineno, "mixed stage names"));
        }
        if f[1].parse::<usize>().ok() != Some(trace.residuals.len()) {
            return Err(IoError::parse(name, lineno, "iterations out of sequence"));
        }
        let r: f64 = f[2]
            .parse()
            .map_err(|_| IoError::parse(name, lineno, format!("bad residual `{}`", f[2])))?;
        trace.push(r);
    }
    Ok((stage, trace))
}
