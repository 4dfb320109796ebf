use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bma::BmaOrder;
use crate::error::{Error, Result};
use crate::io::read_to_string;
use crate::models::{Activation, PartitionPolicy};
use crate::optimizers::{FimMode, ScheduleKind, TrainableGroups};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    TwoMoons,
    Spirals,
    Blobs,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Dnn,
    Sam,
    Fsam,
    Swag,
    SabmaSwag,
    SabmaVi,
}

impl Mode {
    pub fn is_sabma(self) -> bool {
        matches!(self, Mode::SabmaSwag | Mode::SabmaVi)
    }

    pub fn is_bayesian(self) -> bool {
        matches!(self, Mode::Swag | Mode::SabmaSwag | Mode::SabmaVi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n_per_class: usize,
    pub noise: f64,
    /// Class count for spirals and blobs; two_moons is always 2.
    pub classes: usize,
    /// Feature dimension for blobs.
    pub dim: usize,
    /// Distance between adjacent blob centres.
    pub separation: f64,
    /// Training CSV for `kind = csv`.
    pub path: Option<PathBuf>,
    /// Test CSV for `kind = csv`; defaults to the training file.
    pub test_path: Option<PathBuf>,
    /// Overrides the master seed for data generation.
    pub seed: Option<u64>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            kind: DatasetKind::TwoMoons,
            n_per_class: 10,
            noise: 0.1,
            classes: 2,
            dim: 2,
            separation: 10.0,
            path: None,
            test_path: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub hidden: Vec<usize>,
    pub norm: bool,
    pub activation: Activation,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            hidden: vec![16, 16],
            norm: true,
            activation: Activation::Tanh,
        }
    }
}

/// Source-task training that produces the checkpoint every mode starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainSpec {
    pub n_per_class: usize,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Re-initialize `head.*` after pretraining, as when the downstream
    /// label set replaces the source classifier.
    pub reset_head: bool,
}

impl Default for PretrainSpec {
    fn default() -> Self {
        PretrainSpec {
            n_per_class: 200,
            epochs: 200,
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            reset_head: true,
        }
    }
}

/// Unset fields take per-mode defaults (see [`ExperimentConfig::resolved`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OptimSpec {
    pub lr: Option<f64>,
    pub momentum: Option<f64>,
    pub weight_decay: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub rank: Option<usize>,
    pub samples: Option<usize>,
    pub schedule: Option<ScheduleKind>,
    pub fim_mode: Option<FimMode>,
    pub eta_fisher: Option<f64>,
    pub partition: Option<PartitionPolicy>,
    pub groups: Option<TrainableGroups>,
    /// Epochs of SWAG collection before SA-BMA fine-tuning (`sabma_swag`).
    pub convert_epochs: Option<usize>,
    /// Early-stopping patience in epochs; 0 disables it.
    pub patience: Option<usize>,
}

/// Fully specified optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedOptim {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub delta: f64,
    pub beta: f64,
    pub rank: usize,
    pub samples: usize,
    pub schedule: ScheduleKind,
    pub fim_mode: FimMode,
    pub eta_fisher: f64,
    pub partition: PartitionPolicy,
    pub groups: TrainableGroups,
    pub convert_epochs: usize,
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSpec {
    pub spectroscopy: bool,
    pub k: usize,
    pub lanczos_iters: usize,
    pub lanczos_tol: f64,
    /// Samples whose Hessians are measured; defaults to all BMA samples.
    pub spectrum_samples: Option<usize>,
    pub weyl: bool,
    pub orders: Vec<BmaOrder>,
    pub random_repeats: usize,
    pub severities: Vec<u8>,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            spectroscopy: true,
            k: 5,
            lanczos_iters: 80,
            lanczos_tol: 1e-6,
            spectrum_samples: None,
            weyl: true,
            orders: vec![BmaOrder::Flat, BmaOrder::Sharp, BmaOrder::Random],
            random_repeats: 1,
            severities: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub model: ModelSpec,
    pub mode: Mode,
    #[serde(default)]
    pub optim: OptimSpec,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub pretrain: PretrainSpec,
    #[serde(default)]
    pub eval: EvalSpec,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_epochs() -> usize {
    150
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::default(),
            model: ModelSpec::default(),
            mode,
            optim: OptimSpec::default(),
            epochs: default_epochs(),
            pretrain: PretrainSpec::default(),
            eval: EvalSpec::default(),
            out: None,
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Optimizer settings with per-mode defaults filled in. Learning rate,
    /// momentum and weight decay follow the few-shot ResNet18 row of the
    /// reference hyperparameter table (FSAM shares SAM's row).
    pub fn resolved(&self) -> ResolvedOptim {
        let o = &self.optim;
        let sabma = self.mode.is_sabma();
        let (lr, momentum, wd) = match self.mode {
            Mode::Dnn => (5e-3, 0.0, 1e-3),
            Mode::Sam | Mode::Fsam => (1e-2, 0.9, 1e-4),
            Mode::Swag => (5e-3, 0.9, 1e-5),
            Mode::SabmaSwag | Mode::SabmaVi => (5e-2, 0.9, 5e-4),
        };
        // a MOPED posterior is mean-field, so its low-rank factor stays at zero
        let groups = if self.mode == Mode::SabmaVi {
            TrainableGroups {
                lowrank: false,
                ..TrainableGroups::default()
            }
        } else {
            TrainableGroups::default()
        };
        let default_partition = if sabma {
            PartitionPolicy::NormHead
        } else {
            PartitionPolicy::All
        };
        let default_schedule = if self.mode == Mode::Swag {
            ScheduleKind::SwagLr
        } else {
            ScheduleKind::Constant
        };
        ResolvedOptim {
            lr: o.lr.unwrap_or(lr),
            momentum: o.momentum.unwrap_or(momentum),
            weight_decay: o.weight_decay.unwrap_or(wd),
            gamma: o.gamma.unwrap_or(0.1),
            alpha: o.alpha.unwrap_or(1e-4),
            delta: o.delta.unwrap_or(0.05),
            beta: o.beta.unwrap_or(0.0),
            rank: o.rank.unwrap_or(5),
            samples: o.samples.unwrap_or(30),
            schedule: o.schedule.unwrap_or(default_schedule),
            fim_mode: o.fim_mode.unwrap_or_default(),
            eta_fisher: o.eta_fisher.unwrap_or(crate::optimizers::DEFAULT_ETA_FISHER),
            partition: o.partition.unwrap_or(default_partition),
            groups: o.groups.unwrap_or(groups),
            convert_epochs: o.convert_epochs.unwrap_or(50),
            patience: o.patience.unwrap_or(20),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.resolved();
        let bad = |msg: String| Err(Error::Config(msg));
        if self.dataset.n_per_class == 0 {
            return bad("dataset.n_per_class must be >= 1".into());
        }
        if self.dataset.kind == DatasetKind::Csv && self.dataset.path.is_none() {
            return bad("dataset.path is required for kind = csv".into());
        }
        if self.dataset.classes < 2 || self.dataset.dim == 0 {
            return bad("dataset.classes must be >= 2 and dataset.dim >= 1".into());
        }
        if !(self.dataset.noise >= 0.0) {
            return bad(format!("dataset.noise must be >= 0, got {}", self.dataset.noise));
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(r.lr > 0.0) || !(0.0..1.0).contains(&r.momentum) || !(r.weight_decay >= 0.0) {
            return bad("need lr > 0, 0 <= momentum < 1, weight_decay >= 0".into());
        }
        if !(r.gamma >= 0.0) || !(r.alpha > 0.0) || !(r.delta > 0.0) || !(r.beta >= 0.0) || !(r.eta_fisher >= 0.0) {
            return bad("need gamma >= 0, alpha > 0, delta > 0, beta >= 0, eta_fisher >= 0".into());
        }
        if r.samples == 0 {
            return bad("optim.samples must be >= 1".into());
        }
        if self.mode.is_bayesian() && r.rank == 0 && self.mode != Mode::SabmaVi {
            return bad("SWAG-based modes need optim.rank >= 1".into());
        }
        if self.eval.k == 0 || self.eval.lanczos_iters == 0 {
            return bad("eval.k and eval.lanczos_iters must be >= 1".into());
        }
        if let Some(&s) = self.eval.severities.iter().find(|s| !(1..=5).contains(*s)) {
            return bad(format!("corruption severity {s} outside 1..=5"));
        }
        if self.eval.orders.contains(&BmaOrder::Given) {
            return bad("eval.orders accepts flat, sharp and random".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON with `seed` and `out` cleared, so
    /// reports that differ only by seed share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        c.out = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn data_seed(&self) -> u64 {
        self.dataset.seed.unwrap_or(self.seed)
    }
}
