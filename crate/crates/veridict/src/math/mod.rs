//! Dense linear algebra, elementary ML functions, and deterministic randomness.

mod eig;
mod matrix;
mod rng;

pub use eig::sym_eig;
pub use matrix::Matrix;
pub use rng::{mix, RngStream};

use crate::error::{Error, Result};

/// Logistic function, numerically stable on both tails.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Clipping floor applied to probabilities before taking logs.
pub const BCE_EPS: f64 = 1e-12;

/// Mean binary cross entropy with probabilities clipped to `[BCE_EPS, 1 - BCE_EPS]`.
pub fn bce(y: &[f64], p: &[f64]) -> Result<f64> {
    if y.len() != p.len() {
        return Err(Error::shape(format!(
            "bce: {} labels vs {} probabilities",
            y.len(),
            p.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::shape("bce: empty input"));
    }
    let mut total = 0.0;
    for (&yi, &pi) in y.iter().zip(p) {
        let pc = pi.clamp(BCE_EPS, 1.0 - BCE_EPS);
        total -= yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln();
    }
    Ok(total / y.len() as f64)
}

/// Mean of a slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divide by n).
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}
