use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weyl sandwich for `λ_max` of an average of symmetric matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylCertificate {
    pub lambda_maxes: Vec<f64>,
    pub lambda_mins: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    pub observed_lambda_max: f64,
    pub pass: bool,
}

/// `lower = maxᵢ (λ_max(Aᵢ) + Σ_{j≠i} λ_min(Aⱼ)) / M`,
/// `upper = Σᵢ λ_max(Aᵢ) / M`; passes when the observed value lies inside
/// with slack `1e-9 · (1 + |upper|)`.
pub fn weyl_certificate(lambda_maxes: &[f64], lambda_mins: &[f64], observed_lambda_max: f64) -> Result<WeylCertificate> {
    if lambda_maxes.len() != lambda_mins.len() || lambda_maxes.is_empty() {
        return Err(Error::Dimension(format!(
            "need equal non-empty eigenvalue lists, got {} and {}",
            lambda_maxes.len(),
            lambda_mins.len()
        )));
    }
    let m = lambda_maxes.len() as f64;
    let sum_min: f64 = lambda_mins.iter().sum();
    let lower = lambda_maxes
        .iter()
        .zip(lambda_mins)
        .map(|(mx, mn)| (mx + sum_min - mn) / m)
        .fold(f64::NEG_INFINITY, f64::max);
    let upper = lambda_maxes.iter().sum::<f64>() / m;
    let slack = 1e-9 * (1.0 + upper.abs());
    let pass = lower - slack <= observed_lambda_max && observed_lambda_max <= upper + slack;
    Ok(WeylCertificate {
        lambda_maxes: lambda_maxes.to_vec(),
        lambda_mins: lambda_mins.to_vec(),
        lower,
        upper,
        observed_lambda_max,
        pass,
    })
}
