use std::collections::BTreeSet;

use super::PerceptionError;

/// F-beta from precision and recall; 0 when both are 0.
pub fn f_beta_from_pr(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom <= 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// F-beta agreement between a predicted and a true mask. Two empty masks
/// agree perfectly.
pub fn f_beta<T: Ord>(predicted: &BTreeSet<T>, truth: &BTreeSet<T>, beta: f64) -> Result<f64, PerceptionError> {
    if !(beta > 0.0) {
        return Err(PerceptionError::InvalidBeta(beta));
    }
    if predicted.is_empty() && truth.is_empty() {
        return Ok(1.0);
    }
    let hits = predicted.intersection(truth).count() as f64;
    let precision = if predicted.is_empty() { 0.0 } else { hits / predicted.len() as f64 };
    let recall = if truth.is_empty() { 0.0 } else { hits / truth.len() as f64 };
    Ok(f_beta_from_pr(precision, recall, beta))
}
