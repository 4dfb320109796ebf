//! Small feed-forward classifiers with per-sample feature normalization and
//! a named trainable/frozen parameter split.

mod mlp;
mod partition;

pub use mlp::{build_mlp, Activation, DataLoss, Dataset, Model, NORM_EPS};
pub use partition::{partition_params, ParamPartition, PartitionPolicy};
