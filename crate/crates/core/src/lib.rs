//! Flat-posterior Bayesian model averaging.
//!
//! The crate bundles a small reverse-mode autodiff engine, MLP classifiers
//! with a trainable/frozen parameter split, Gaussian posteriors with
//! diagonal plus low-rank covariance, the SGD/SAM/FSAM/natural-gradient and
//! sharpness-aware Bayesian optimizers, Hessian spectroscopy, Bayesian
//! model averaging metrics, loss-surface planes and an experiment harness.

pub mod autodiff;
pub mod bma;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod losssurface;
pub mod io;
pub mod models;
pub mod optimizers;
pub mod posterior;
pub mod seeds;
pub mod spectroscopy;

pub use error::{Error, Result};
