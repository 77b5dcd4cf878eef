//! Dense vector kernels over `f64` slices.

use crate::error::{Error, Result};
use alloc::format;
use alloc::vec::Vec;

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    libm::sqrt(dot(x, x))
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(a: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= a);
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// `a * x + b * y`
pub fn lincomb(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(u, v)| a * u + b * v).collect()
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

pub(crate) fn check_finite(x: &[f64], what: &'static str) -> Result<()> {
    if all_finite(x) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn check_len(x: &[f64], n: usize, what: &str) -> Result<()> {
    if x.len() == n {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what}: expected length {n}, got {}",
            x.len()
        )))
    }
}

/// Relative Euclidean distance `‖x − y‖ / ‖y‖`, falling back to the absolute
/// distance when `y` vanishes.
pub fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    let d = norm2(&sub(x, y));
    let n = norm2(y);
    if n > 0.0 {
        d / n
    } else {
        d
    }
}
