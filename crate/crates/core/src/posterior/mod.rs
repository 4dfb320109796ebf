//! Gaussian variational posterior `N(μ, (diag σ² + L Lᵀ) / 2)` over the
//! trainable partition, with SWAG fitting and MOPED conversion.

mod checkpoint;
mod gaussian;
mod moped;
mod swag;

pub use checkpoint::{load_posterior, save_posterior, PosteriorCheckpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gaussian::{GaussianPosterior, Noise, Theta, MAX_CORE_CONDITION};
pub use moped::{elbo_loss, kl_to_prior, kl_to_prior_grad, moped_from_dnn, DiagonalPrior, MOPED_SIGMA_FLOOR};
pub use swag::{swag_fit, SwagCollector, SWAG_VARIANCE_FLOOR};
