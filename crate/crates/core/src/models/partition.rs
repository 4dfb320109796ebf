use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::mlp::Model;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionPolicy {
    #[serde(rename = "norm+head")]
    NormHead,
    #[serde(rename = "head")]
    Head,
    #[serde(rename = "all")]
    All,
}

impl FromStr for PartitionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm+head" => Ok(PartitionPolicy::NormHead),
            "head" => Ok(PartitionPolicy::Head),
            "all" => Ok(PartitionPolicy::All),
            other => Err(Error::UnknownPolicy(other.to_string())),
        }
    }
}

/// Split of parameter indices into trainable `w_s` and frozen `w_f`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamPartition {
    trainable: Vec<usize>,
    frozen: Vec<usize>,
}

impl ParamPartition {
    /// Build from a trainable index set over `[0, total)`.
    pub fn from_trainable(mut trainable: Vec<usize>, total: usize) -> Result<Self> {
        trainable.sort_unstable();
        trainable.dedup();
        if trainable.last().is_some_and(|&i| i >= total) {
            return Err(Error::Dimension(format!("trainable index out of range for {total} params")));
        }
        let mut mask = vec![false; total];
        for &i in &trainable {
            mask[i] = true;
        }
        let frozen = (0..total).filter(|&i| !mask[i]).collect();
        Ok(ParamPartition { trainable, frozen })
    }

    pub fn all(total: usize) -> Self {
        ParamPartition {
            trainable: (0..total).collect(),
            frozen: Vec::new(),
        }
    }

    pub fn trainable(&self) -> &[usize] {
        &self.trainable
    }

    pub fn frozen(&self) -> &[usize] {
        &self.frozen
    }

    /// `p₁`
    pub fn num_trainable(&self) -> usize {
        self.trainable.len()
    }

    /// `p = p₁ + p₂`
    pub fn total(&self) -> usize {
        self.trainable.len() + self.frozen.len()
    }

    pub fn gather_trainable(&self, full: &[f64]) -> Vec<f64> {
        self.trainable.iter().map(|&i| full[i]).collect()
    }

    pub fn gather_frozen(&self, full: &[f64]) -> Vec<f64> {
        self.frozen.iter().map(|&i| full[i]).collect()
    }

    /// Assemble a full vector from `w_s` and `w_f`.
    pub fn assemble(&self, trainable: &[f64], frozen: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.total()];
        for (&i, &v) in self.trainable.iter().zip(trainable) {
            out[i] = v;
        }
        for (&i, &v) in self.frozen.iter().zip(frozen) {
            out[i] = v;
        }
        out
    }

    /// Structural check: disjoint index sets that together cover `[0, p)`.
    pub fn is_valid(&self) -> bool {
        let p = self.total();
        let mut seen = vec![false; p];
        for &i in self.trainable.iter().chain(&self.frozen) {
            if i >= p || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        true
    }
}

pub fn partition_params(model: &Model, policy: PartitionPolicy) -> ParamPartition {
    let total = model.num_params();
    if policy == PartitionPolicy::All {
        return ParamPartition::all(total);
    }
    let trainable: Vec<usize> = model
        .layout()
        .entries()
        .iter()
        .filter(|e| {
            e.name.starts_with("head.")
                || (policy == PartitionPolicy::NormHead && e.name.starts_with("norm"))
        })
        .flat_map(|e| e.range())
        .collect();
    ParamPartition::from_trainable(trainable, total).expect("registry indices are in range")
}
