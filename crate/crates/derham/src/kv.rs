//! Line-oriented `key = value` files used for run configuration, system
//! manifests and summaries.

use crate::error::{IoError, Result};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

/// `#` starts a comment line; a repeated key is an error.
pub fn parse_kv(text: &str, name: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| IoError::parse(name, idx + 1, "expected `key = value`"))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(IoError::parse(name, idx + 1, "empty key"));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(IoError::parse(name, idx + 1, format!("duplicate key `{k}`")));
        }
    }
    Ok(out)
}

pub fn read_kv_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    parse_kv(&text, &path.display().to_string())
}
