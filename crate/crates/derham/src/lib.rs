//! File formats, settings and command implementations for the `derham`
//! binary. The numerics live in `derham-core`.

pub mod bundle;
pub mod config;
pub mod error;
pub mod kv;
pub mod mtx;
pub mod run;
pub mod trace;
pub mod vecio;

pub use error::{IoError, Result};
