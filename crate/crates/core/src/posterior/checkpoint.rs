//! JSON posterior checkpoints.
//!
//! ```text
//! {
//!   "format": "sabma-posterior",
//!   "version": 1,
//!   "p1": <int>, "K": <int>,
//!   "mu": [p1 floats], "log_sigma": [p1 floats],
//!   "L": [p1*K floats, row-major],
//!   "trainable_indices": [p1 ints], "frozen_indices": [p2 ints],
//!   "frozen_values": [p2 floats],
//!   "registry": {"entries": [{"name", "start", "end", "shape"}, ...]}
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gaussian::GaussianPosterior;
use crate::autodiff::ParamLayout;
use crate::error::{Error, Result};
use crate::io::{read_to_string, write_atomic};
use crate::models::ParamPartition;

pub const CHECKPOINT_FORMAT: &str = "sabma-posterior";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorCheckpoint {
    pub format: String,
    pub version: u32,
    pub p1: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
    #[serde(rename = "L")]
    pub lowrank: Vec<f64>,
    pub trainable_indices: Vec<usize>,
    pub frozen_indices: Vec<usize>,
    pub frozen_values: Vec<f64>,
    pub registry: ParamLayout,
}

impl From<&GaussianPosterior> for PosteriorCheckpoint {
    fn from(post: &GaussianPosterior) -> Self {
        PosteriorCheckpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            p1: post.dim(),
            k: post.rank,
            mu: post.mu.clone(),
            log_sigma: post.log_sigma.clone(),
            lowrank: post.lowrank.clone(),
            trainable_indices: post.partition.trainable().to_vec(),
            frozen_indices: post.partition.frozen().to_vec(),
            frozen_values: post.frozen_values.clone(),
            registry: post.registry.clone(),
        }
    }
}

impl PosteriorCheckpoint {
    pub fn into_posterior(self) -> Result<GaussianPosterior> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let total = self.trainable_indices.len() + self.frozen_indices.len();
        let partition = ParamPartition::from_trainable(self.trainable_indices, total)?;
        if partition.frozen() != self.frozen_indices.as_slice() || partition.num_trainable() != self.p1 {
            return Err(Error::Config("checkpoint partition indices are inconsistent".into()));
        }
        self.registry.validate()?;
        GaussianPosterior::new(
            self.mu,
            self.log_sigma,
            self.lowrank,
            self.k,
            partition,
            self.frozen_values,
            self.registry,
        )
    }
}

pub fn save_posterior(post: &GaussianPosterior, path: &Path) -> Result<()> {
    let json = serde_json::to_vec_pretty(&PosteriorCheckpoint::from(post))?;
    write_atomic(path, &json)
}

pub fn load_posterior(path: &Path) -> Result<GaussianPosterior> {
    let ck: PosteriorCheckpoint = serde_json::from_str(&read_to_string(path)?)?;
    ck.into_posterior()
}
