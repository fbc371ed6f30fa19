//! Small dense-vector helpers. Features are stored as `f32`, all arithmetic
//! is carried out in `f64`.

use crate::error::{Error, Result};

pub(crate) fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub(crate) fn dot_mixed(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y).sum()
}

pub(crate) fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm_f32(a: &[f32]) -> f64 {
    libm::sqrt(dot_f32(a, a))
}

pub(crate) fn norm_f64(a: &[f64]) -> f64 {
    libm::sqrt(dot_f64(a, a))
}

pub(crate) fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

pub(crate) fn euclidean_to_f64(a: &[f32], b: &[f64]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y;
            d * d
        })
        .sum();
    libm::sqrt(s)
}

/// Cosine similarity between a feature and a prototype-like vector. Returns
/// `None` when either side has zero norm.
pub(crate) fn cosine_mixed(a: &[f32], b: &[f64]) -> Option<f64> {
    let na = norm_f32(a);
    let nb = norm_f64(b);
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot_mixed(a, b) / (na * nb))
}

/// Checks dimension and finiteness of an incoming feature.
pub(crate) fn validate_feature(f: &[f32], dim: usize) -> Result<()> {
    if f.len() != dim {
        return Err(Error::invalid_feature(alloc::format!(
            "expected dimension {dim}, got {}",
            f.len()
        )));
    }
    if let Some(i) = f.iter().position(|x| !x.is_finite()) {
        return Err(Error::invalid_feature(alloc::format!(
            "non-finite component at index {i}"
        )));
    }
    Ok(())
}
