//! Fairness statistics over per-user totals.

use crate::error::{Error, Result};

/// Unbiased sample variance, `1/(m-1) * sum (v - mean)^2`.
pub fn sample_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Dimension(format!(
            "sample variance needs at least two values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(ss / (n - 1.0))
}

/// Jain's fairness index `(sum v)^2 / (m * sum v^2)`.
///
/// An all-zero vector is perfectly equal and scores 1.
pub fn jain_index(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Dimension("Jain index of an empty vector".into()));
    }
    if let Some(v) = values.iter().find(|v| **v < 0.0 || !v.is_finite()) {
        return Err(Error::param(
            "values",
            format!("Jain index needs finite values >= 0, got {v}"),
        ));
    }
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return Ok(1.0);
    }
    Ok(sum * sum / (values.len() as f64 * sum_sq))
}
