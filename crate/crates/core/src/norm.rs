//! Weighted Euclidean norms.
//!
//! For a strictly positive weight vector `w`, `‖x‖_w² = Σ w_j x_j²` and the
//! dual norm is `‖x‖_{w,*}² = Σ x_j² / w_j`.

use crate::error::{Error, Result};

pub fn weighted_norm_sq(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(xi, wi)| wi * xi * xi).sum()
}

pub fn weighted_norm(x: &[f64], w: &[f64]) -> f64 {
    weighted_norm_sq(x, w).sqrt()
}

pub fn dual_norm_sq(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(xi, wi)| xi * xi / wi).sum()
}

pub fn dual_norm(x: &[f64], w: &[f64]) -> f64 {
    dual_norm_sq(x, w).sqrt()
}

/// `‖x − y‖_w`.
pub fn weighted_distance(x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(w)
        .map(|((a, b), wi)| wi * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Checks that `w` has length `m` and strictly positive finite entries.
pub fn check_weights(w: &[f64], m: usize) -> Result<()> {
    if w.len() != m {
        return Err(Error::DimensionMismatch {
            what: "weights".into(),
            expected: m,
            found: w.len(),
        });
    }
    if let Some((j, v)) = w
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        return Err(Error::InvalidWeights(format!(
            "w[{j}] = {v} is not strictly positive"
        )));
    }
    Ok(())
}
