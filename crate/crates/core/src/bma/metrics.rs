use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};

pub const ECE_BINS: usize = 15;
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percent correct, 0..=100.
    pub acc: f64,
    pub ece: f64,
    pub nll: f64,
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Accuracy, expected calibration error over equal-width right-closed
/// confidence bins, and mean negative log likelihood.
pub fn metrics(probs: &Matrix, labels: &[usize]) -> Result<Metrics> {
    let n = probs.rows();
    if n != labels.len() || n == 0 {
        return Err(Error::Dimension(format!("{n} prediction rows for {} labels", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= probs.cols()) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range for {} classes", probs.cols())));
    }
    let mut correct = 0usize;
    let mut nll = 0.0;
    let mut bin_count = [0usize; ECE_BINS];
    let mut bin_correct = [0usize; ECE_BINS];
    let mut bin_conf = [0.0; ECE_BINS];
    for (r, &y) in labels.iter().enumerate() {
        let row = probs.row(r);
        let pred = argmax(row);
        let conf = row[pred];
        let hit = pred == y;
        correct += hit as usize;
        nll -= row[y].max(PROB_FLOOR).ln();
        let b = ((conf * ECE_BINS as f64).ceil() as usize).clamp(1, ECE_BINS) - 1;
        bin_count[b] += 1;
        bin_correct[b] += hit as usize;
        bin_conf[b] += conf;
    }
    let nf = n as f64;
    let ece = (0..ECE_BINS)
        .filter(|&b| bin_count[b] > 0)
        .map(|b| {
            let c = bin_count[b] as f64;
            (c / nf) * (bin_correct[b] as f64 / c - bin_conf[b] / c).abs()
        })
        .sum();
    Ok(Metrics {
        acc: 100.0 * correct as f64 / nf,
        ece,
        nll: nll / nf,
    })
}
