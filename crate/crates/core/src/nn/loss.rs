use super::Tensor;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_EPSILON, 1 - BCE_EPSILON]` before the log.
pub const BCE_EPSILON: f64 = 1e-12;

/// Mean binary cross-entropy.
pub fn bce_loss(p: &Tensor, y: &Tensor) -> Result<f64> {
    if p.len() != y.len() {
        return Err(Error::shape(format!(
            "bce_loss: {} predictions vs {} labels",
            p.len(),
            y.len()
        )));
    }
    if p.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = p
        .data()
        .iter()
        .zip(y.data())
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / p.len() as f64)
}

/// Mean squared elementwise difference.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "mse_loss: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let total: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(total / pred.len() as f64)
}
