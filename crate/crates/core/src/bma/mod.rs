//! Monte Carlo model averaging, classification metrics and the
//! flatness-ordered prefix curves.

mod metrics;
mod ordered;

pub use metrics::{argmax, metrics, Metrics, ECE_BINS, PROB_FLOOR};
pub use ordered::{ordered_bma, ordered_bma_from_probs, sample_order, BmaOrder, BmaReport, PrefixMetrics};

use rayon::prelude::*;

use crate::autodiff::{Matrix, ParamVector};
use crate::error::{Error, Result};
use crate::models::Model;

/// Row-wise softmax of a logit matrix.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Softmax probabilities of each weight sample on `x`.
pub fn sample_probs(model: &Model, samples: &[ParamVector], x: &Matrix) -> Result<Vec<Matrix>> {
    samples
        .par_iter()
        .map(|w| model.predict(&w.values, x).map(|l| softmax(&l)))
        .collect()
}

/// Arithmetic mean of matrices, summed in slice order.
pub fn average_probs(probs: &[&Matrix]) -> Result<Matrix> {
    let first = probs
        .first()
        .ok_or_else(|| Error::InvalidArgument("model averaging needs at least one sample".into()))?;
    let mut acc = Matrix::zeros(first.rows(), first.cols());
    for p in probs {
        if p.shape() != first.shape() {
            return Err(Error::Dimension(format!(
                "sample predictions have shapes {:?} and {:?}",
                first.shape(),
                p.shape()
            )));
        }
        acc.add_assign(p);
    }
    let m = probs.len() as f64;
    Ok(acc.map(|v| v / m))
}

/// `(1/M) Σᵢ softmax(f(x; wᵢ))`.
pub fn bma_predict(model: &Model, samples: &[ParamVector], x: &Matrix) -> Result<Matrix> {
    let probs = sample_probs(model, samples, x)?;
    average_probs(&probs.iter().collect::<Vec<_>>())
}
