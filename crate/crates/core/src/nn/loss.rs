use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

fn check(y: &[Vec<f64>], target: &[Vec<f64>]) -> Result<usize> {
    if y.len() != target.len() {
        return Err(Error::Shape(format!("{} outputs vs {} targets", y.len(), target.len())));
    }
    if y.is_empty() {
        return Err(Error::Empty("loss over zero steps".into()));
    }
    let mut count = 0;
    for (t, (a, b)) in y.iter().zip(target).enumerate() {
        if a.len() != b.len() {
            return Err(Error::Shape(format!("step {t}: output has {} components, target {}", a.len(), b.len())));
        }
        count += a.len();
    }
    Ok(count)
}

/// Mean squared error over all steps and output components.
pub fn mse_loss(y: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64> {
    let count = check(y, target)?;
    let sum: f64 = y
        .iter()
        .zip(target)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)))
        .sum();
    Ok(sum / count as f64)
}

/// `∂ mse / ∂ y`.
pub(crate) fn mse_grad(y: &[Vec<f64>], target: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let scale = 2.0 / check(y, target)? as f64;
    Ok(y.iter()
        .zip(target)
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| scale * (p - q)).collect())
        .collect())
}
