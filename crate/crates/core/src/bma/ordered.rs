use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics, Metrics};
use super::{average_probs, sample_probs};
use crate::autodiff::{Matrix, ParamVector};
use crate::error::{Error, Result};
use crate::models::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BmaOrder {
    /// Ascending `λ₁`.
    Flat,
    /// Descending `λ₁`.
    Sharp,
    /// Seeded shuffle.
    Random,
    /// Caller-supplied permutation.
    Given,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefixMetrics {
    pub k: usize,
    pub acc: f64,
    pub ece: f64,
    pub nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmaReport {
    #[serde(rename = "M")]
    pub m: usize,
    pub ordering: BmaOrder,
    pub sample_order: Vec<usize>,
    pub prefix: Vec<PrefixMetrics>,
    #[serde(rename = "final")]
    pub final_metrics: Metrics,
    pub lambda1s: Option<Vec<f64>>,
}

/// Permutation of `0..m` for the requested ordering. Equal `λ₁` values keep
/// their original index order.
pub fn sample_order(
    order: BmaOrder,
    m: usize,
    lambda1s: Option<&[f64]>,
    given: Option<&[usize]>,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut idx: Vec<usize> = (0..m).collect();
    match order {
        BmaOrder::Flat | BmaOrder::Sharp => {
            let l = lambda1s.ok_or_else(|| Error::InvalidArgument("flat and sharp orderings need λ₁ values".into()))?;
            if l.len() != m {
                return Err(Error::Dimension(format!("{} λ₁ values for {m} samples", l.len())));
            }
            if order == BmaOrder::Flat {
                idx.sort_by(|&a, &b| l[a].total_cmp(&l[b]).then(a.cmp(&b)));
            } else {
                idx.sort_by(|&a, &b| l[b].total_cmp(&l[a]).then(a.cmp(&b)));
            }
        }
        BmaOrder::Random => idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
        BmaOrder::Given => {
            let g = given.ok_or_else(|| Error::InvalidArgument("given ordering needs a permutation".into()))?;
            let mut seen = vec![false; m];
            if g.len() != m || g.iter().any(|&i| i >= m || std::mem::replace(&mut seen[i], true)) {
                return Err(Error::InvalidArgument(format!("{g:?} is not a permutation of 0..{m}")));
            }
            idx = g.to_vec();
        }
    }
    Ok(idx)
}

/// Prefix curves over injected per-sample probabilities. Prefix `k` averages
/// exactly the first `k` samples of the ordering, summed in ascending original
/// index so that equal sets give bitwise-equal averages.
pub fn ordered_bma_from_probs(
    probs: &[Matrix],
    lambda1s: Option<&[f64]>,
    order: BmaOrder,
    given: Option<&[usize]>,
    labels: &[usize],
    seed: u64,
) -> Result<BmaReport> {
    let m = probs.len();
    if m == 0 {
        return Err(Error::InvalidArgument("model averaging needs at least one sample".into()));
    }
    let perm = sample_order(order, m, lambda1s, given, seed)?;
    let mut prefix = Vec::with_capacity(m);
    let mut members = Vec::with_capacity(m);
    for (k, &i) in perm.iter().enumerate() {
        let pos = members.partition_point(|&j| j < i);
        members.insert(pos, i);
        let chosen: Vec<&Matrix> = members.iter().map(|&j| &probs[j]).collect();
        let met = metrics(&average_probs(&chosen)?, labels)?;
        prefix.push(PrefixMetrics {
            k: k + 1,
            acc: met.acc,
            ece: met.ece,
            nll: met.nll,
        });
    }
    let last = prefix[m - 1];
    Ok(BmaReport {
        m,
        ordering: order,
        sample_order: perm,
        prefix,
        final_metrics: Metrics {
            acc: last.acc,
            ece: last.ece,
            nll: last.nll,
        },
        lambda1s: lambda1s.map(<[f64]>::to_vec),
    })
}

pub fn ordered_bma(
    model: &Model,
    samples: &[ParamVector],
    lambda1s: Option<&[f64]>,
    order: BmaOrder,
    x: &Matrix,
    labels: &[usize],
    seed: u64,
) -> Result<BmaReport> {
    let probs = sample_probs(model, samples, x)?;
    ordered_bma_from_probs(&probs, lambda1s, order, None, labels, seed)
}
