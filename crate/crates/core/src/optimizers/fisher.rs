use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{Dataset, Model};

/// Mean over the batch of squared per-example gradients of `log p(y|x, w)`.
pub fn diag_predictive_fim(model: &Model, params: &[f64], batch: &Dataset) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch for the predictive Fisher".into()));
    }
    let per_example: Vec<Vec<f64>> = (0..batch.len())
        .into_par_iter()
        .map(|i| model.loss_and_grad(params, &batch.subset(&[i])).map(|(_, g)| g))
        .collect::<Result<_>>()?;
    let n = batch.len() as f64;
    let mut fim = vec![0.0; params.len()];
    for g in &per_example {
        for (f, v) in fim.iter_mut().zip(g) {
            *f += v * v;
        }
    }
    fim.iter_mut().for_each(|f| *f /= n);
    Ok(fim)
}

/// `θ ← θ − lr · F⁻¹ ∇l` with diagonal `F` clamped below at `eps`.
pub fn ng_step(params: &mut [f64], grad: &[f64], diag_fim: &[f64], lr: f64, eps: f64) {
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), diag_fim.len());
    for ((p, g), f) in params.iter_mut().zip(grad).zip(diag_fim) {
        *p -= lr * g / f.max(eps);
    }
}
