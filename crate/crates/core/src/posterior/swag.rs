use std::collections::VecDeque;

use super::gaussian::GaussianPosterior;
use crate::autodiff::ParamVector;
use crate::error::{Error, Result};
use crate::models::ParamPartition;

/// Floor applied to the diagonal SWAG variance.
pub const SWAG_VARIANCE_FLOOR: f64 = 1e-12;

/// Running first/second moments of SGD iterates over the trainable
/// partition, plus the last `rank` deviation vectors.
#[derive(Debug, Clone)]
pub struct SwagCollector {
    partition: ParamPartition,
    rank: usize,
    n: usize,
    mean: Vec<f64>,
    sq_mean: Vec<f64>,
    deviations: VecDeque<Vec<f64>>,
    last: Option<ParamVector>,
}

impl SwagCollector {
    pub fn new(partition: ParamPartition, rank: usize) -> Self {
        let p1 = partition.num_trainable();
        SwagCollector {
            partition,
            rank,
            n: 0,
            mean: vec![0.0; p1],
            sq_mean: vec![0.0; p1],
            deviations: VecDeque::with_capacity(rank),
            last: None,
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Add one snapshot. The deviation stored for the low-rank factor is
    /// measured against the running mean after this snapshot is included.
    pub fn collect(&mut self, params: &ParamVector) -> Result<()> {
        if params.len() != self.partition.total() {
            return Err(Error::Dimension(format!(
                "snapshot has {} params, partition covers {}",
                params.len(),
                self.partition.total()
            )));
        }
        let w = self.partition.gather_trainable(&params.values);
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.sq_mean.iter_mut()).zip(&w) {
            *m += (x - *m) / n;
            *s += (x * x - *s) / n;
        }
        if self.rank > 0 {
            if self.deviations.len() == self.rank {
                self.deviations.pop_front();
            }
            self.deviations.push_back(w.iter().zip(&self.mean).map(|(x, m)| x - m).collect());
        }
        self.last = Some(params.clone());
        Ok(())
    }
}

/// Fit `μ = mean`, `σ² = max(E[w²] − μ², 1e-12)` and `L = D / √(K−1)`
/// (`D / 1` when K = 1), `D` holding the last K deviations as columns.
pub fn swag_fit(collector: &SwagCollector) -> Result<GaussianPosterior> {
    let need = 2.max(collector.rank + 1);
    if collector.n < need {
        return Err(Error::InsufficientSnapshots {
            have: collector.n,
            need,
        });
    }
    let last = collector.last.as_ref().expect("n >= 2 implies a snapshot");
    let p1 = collector.mean.len();
    let k = collector.rank;
    let log_sigma = collector
        .mean
        .iter()
        .zip(&collector.sq_mean)
        .map(|(m, s)| 0.5 * (s - m * m).max(SWAG_VARIANCE_FLOOR).ln())
        .collect();
    let scale = 1.0 / ((k.max(2) - 1) as f64).sqrt();
    let mut lowrank = vec![0.0; p1 * k];
    for (j, dev) in collector.deviations.iter().enumerate() {
        for i in 0..p1 {
            lowrank[i * k + j] = dev[i] * scale;
        }
    }
    GaussianPosterior::new(
        collector.mean.clone(),
        log_sigma,
        lowrank,
        k,
        collector.partition.clone(),
        collector.partition.gather_frozen(&last.values),
        last.registry.clone(),
    )
}
