use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Result of checking a lifted item's weight against the grasp target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "labels")]
pub enum Verdict {
    Confirmed,
    Reclassified(String),
    SecondLook(Vec<String>),
    Replace,
}

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("no scale readings around the lift")]
    NoScaleData,
}

/// Compares the weight lost by the source container with the expected
/// item's mass. `believed` lists the items thought to be in the source,
/// with their catalogue masses.
pub fn verify_grasp(
    before_g: Option<f64>,
    after_g: Option<f64>,
    expected: (&str, f64),
    believed: &[(String, f64)],
    tolerance_g: f64,
) -> Result<Verdict, VerifyError> {
    let (Some(before), Some(after)) = (before_g, after_g) else {
        return Err(VerifyError::NoScaleData);
    };
    let delta = before - after;
    if (delta - expected.1).abs() <= tolerance_g {
        return Ok(Verdict::Confirmed);
    }
    let mut matches: Vec<String> = believed
        .iter()
        .filter(|(label, mass)| label != expected.0 && (delta - mass).abs() <= tolerance_g)
        .map(|(label, _)| label.clone())
        .collect();
    matches.sort();
    matches.dedup();
    Ok(match matches.len() {
        0 => Verdict::Replace,
        1 => Verdict::Reclassified(matches.remove(0)),
        _ => Verdict::SecondLook(matches),
    })
}
