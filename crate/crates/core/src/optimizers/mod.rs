//! SGD with momentum, SAM, FSAM, diagonal natural gradient and the
//! sharpness-aware Bayesian optimizer over variational parameters.

mod fisher;
mod perturb;
mod sabma;
mod schedule;
mod sgd;

pub use fisher::{diag_predictive_fim, ng_step};
pub use perturb::{
    fsam_perturb, sabma_perturb, sam_perturb, theta_perturbation, FimMode, PerturbationConfig,
    DEFAULT_EPS, DEFAULT_ETA_FISHER,
};
pub use sabma::{reparam_gradient, sabma_gradient, sabma_step, SabmaConfig, SabmaGradient, SabmaOptimizer, SabmaStepReport, TrainableGroups};
pub use schedule::{lr_at, LrSchedule, ScheduleKind};
pub use sgd::{sgd_step, SgdState};
