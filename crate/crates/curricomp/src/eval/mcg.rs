//! Majority-class-guessing baseline.

use crate::eval::MetricError;

/// Expected accuracy of always guessing the majority class: max_i P(i).
///
/// Probabilities must sum to 1 within 1e-9 and be non-negative. Aggregate
/// baselines over several slices are the mean of the per-slice values.
pub fn mcg_accuracy(distribution: &[f64]) -> Result<f64, MetricError> {
    if distribution.is_empty() {
        return Err(MetricError::InvalidDistribution);
    }
    let sum: f64 = distribution.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || distribution.iter().any(|&p| p < 0.0) {
        return Err(MetricError::InvalidDistribution);
    }
    Ok(distribution.iter().cloned().fold(f64::MIN, f64::max))
}
