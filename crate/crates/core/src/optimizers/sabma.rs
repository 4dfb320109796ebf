//! Sharpness-aware step on the variational parameters θ = (μ, log σ, L).
//!
//! One step: draw `(z₁, z₂)`, sample `w`, take the reparameterized loss
//! gradient ∇θ l, form the perturbation Δθ under the configured metric,
//! re-evaluate ∇θ l at θ + Δθ with the same `(z₁, z₂)`, then apply an SGD
//! momentum update at θ with that gradient.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use super::fisher::diag_predictive_fim;
use super::perturb::{theta_perturbation, FimMode, PerturbationConfig};
use super::sgd::{sgd_step, SgdState};
use crate::autodiff::ParamVector;
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::models::{Dataset, Model};
use crate::posterior::{kl_to_prior, kl_to_prior_grad, DiagonalPrior, GaussianPosterior, Noise, Theta};

/// Which variational groups receive perturbations and updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainableGroups {
    pub mu: bool,
    pub log_sigma: bool,
    pub lowrank: bool,
}

impl Default for TrainableGroups {
    fn default() -> Self {
        TrainableGroups {
            mu: true,
            log_sigma: true,
            lowrank: true,
        }
    }
}

impl TrainableGroups {
    pub fn mean_only() -> Self {
        TrainableGroups {
            mu: true,
            log_sigma: false,
            lowrank: false,
        }
    }

    pub fn flags(&self) -> [bool; 3] {
        [self.mu, self.log_sigma, self.lowrank]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SabmaConfig {
    pub perturbation: PerturbationConfig,
    pub momentum: f64,
    /// Weight decay on μ only.
    pub weight_decay: f64,
    /// KL weight towards the initial posterior; 0 means plain NLL.
    pub beta: f64,
    pub groups: TrainableGroups,
}

impl SabmaConfig {
    pub fn new(perturbation: PerturbationConfig) -> Self {
        SabmaConfig {
            perturbation,
            momentum: 0.9,
            weight_decay: 0.0,
            beta: 0.0,
            groups: TrainableGroups::default(),
        }
    }
}

/// Result of the two-pass gradient computation of one step.
#[derive(Debug, Clone)]
pub struct SabmaGradient {
    /// Loss at θ with the drawn noise.
    pub loss: f64,
    /// ∇θ l at θ (masked to trained groups).
    pub base_grad: Theta,
    pub perturbation: Theta,
    /// ∇θ l at θ + Δθ, same noise (masked).
    pub grad: Theta,
    pub sample: ParamVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SabmaStepReport {
    pub loss: f64,
    pub perturbation_norm: f64,
}

fn mask(theta: &mut Theta, flags: [bool; 3]) {
    for (g, on) in theta.groups_mut().into_iter().zip(flags) {
        if !on {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        Some((index, &value)) => Err(Error::NonFinite { index, value }),
        None => Ok(()),
    }
}

/// Reparameterized loss and its gradient with respect to θ at fixed noise.
/// Returns `(loss, ∇θ l, w_s, w)`.
pub fn reparam_gradient(
    model: &Model,
    post: &GaussianPosterior,
    noise: &Noise,
    batch: &Dataset,
    beta: f64,
    prior: Option<&DiagonalPrior>,
) -> Result<(f64, Theta, Vec<f64>, ParamVector)> {
    let w_s = post.trainable_sample(noise);
    let w = post.assemble(&w_s);
    let (mut loss, g_full) = model.loss_and_grad(&w.values, batch)?;
    let g_w = post.partition.gather_trainable(&g_full);
    let k = post.rank;
    let sigma = post.sigma();
    let mut grad = Theta {
        mu: g_w.clone(),
        log_sigma: g_w
            .iter()
            .zip(&sigma)
            .zip(&noise.diag)
            .map(|((g, s), z)| g * s * z * FRAC_1_SQRT_2)
            .collect(),
        lowrank: vec![0.0; post.dim() * k],
    };
    for (i, g) in g_w.iter().enumerate() {
        for (j, z) in noise.lowrank.iter().enumerate() {
            grad.lowrank[i * k + j] = g * z * FRAC_1_SQRT_2;
        }
    }
    if beta != 0.0 {
        let prior = prior.ok_or_else(|| Error::InvalidArgument("beta > 0 needs a prior".into()))?;
        loss += beta * kl_to_prior(post, prior);
        let (gm, gs) = kl_to_prior_grad(post, prior);
        for (a, b) in grad.mu.iter_mut().zip(gm) {
            *a += beta * b;
        }
        for (a, b) in grad.log_sigma.iter_mut().zip(gs) {
            *a += beta * b;
        }
    }
    Ok((loss, grad, w_s, w))
}

/// Both gradient passes of one step, without touching θ.
pub fn sabma_gradient(
    model: &Model,
    post: &GaussianPosterior,
    batch: &Dataset,
    cfg: &SabmaConfig,
    prior: Option<&DiagonalPrior>,
    seed: u64,
) -> Result<SabmaGradient> {
    cfg.perturbation.validate()?;
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let flags = cfg.groups.flags();
    let noise = post.draw_noise(seed);
    let (loss, mut base_grad, w_s, sample) = reparam_gradient(model, post, &noise, batch, cfg.beta, prior)?;
    mask(&mut base_grad, flags);

    let score = match cfg.perturbation.fim_mode {
        FimMode::SamelsonPosterior => Some(post.grad_log_density(&w_s)?),
        _ => None,
    };
    let fisher = match cfg.perturbation.fim_mode {
        FimMode::DiagonalPredictive => {
            let full = diag_predictive_fim(model, &sample.values, batch)?;
            Some(post.partition.gather_trainable(&full))
        }
        _ => None,
    };
    let perturbation = theta_perturbation(&cfg.perturbation, &base_grad, score.as_ref(), fisher.as_deref(), flags)?;

    let is_zero = perturbation.groups().iter().all(|g| g.iter().all(|&v| v == 0.0));
    let grad = if is_zero {
        base_grad.clone()
    } else {
        let shifted = post.with_theta(post.theta().plus(&perturbation));
        let (_, mut g, _, _) = reparam_gradient(model, &shifted, &noise, batch, cfg.beta, prior)?;
        mask(&mut g, flags);
        g
    };
    for g in grad.groups() {
        check_finite(g)?;
    }
    Ok(SabmaGradient {
        loss,
        base_grad,
        perturbation,
        grad,
        sample,
    })
}

/// Optimizer state: one momentum buffer per variational group plus the
/// optional KL reference.
#[derive(Debug, Clone)]
pub struct SabmaOptimizer {
    pub cfg: SabmaConfig,
    state: [SgdState; 3],
    prior: Option<DiagonalPrior>,
}

impl SabmaOptimizer {
    /// Records `post` as the KL reference when `cfg.beta > 0`.
    pub fn new(cfg: SabmaConfig, post: &GaussianPosterior) -> Self {
        let prior = (cfg.beta != 0.0).then(|| DiagonalPrior::from_posterior(post));
        SabmaOptimizer {
            cfg,
            state: [
                SgdState::new(post.mu.len()),
                SgdState::new(post.log_sigma.len()),
                SgdState::new(post.lowrank.len()),
            ],
            prior,
        }
    }

    pub fn prior(&self) -> Option<&DiagonalPrior> {
        self.prior.as_ref()
    }

    pub fn gradient(&self, model: &Model, post: &GaussianPosterior, batch: &Dataset, seed: u64) -> Result<SabmaGradient> {
        sabma_gradient(model, post, batch, &self.cfg, self.prior.as_ref(), seed)
    }

    pub fn step(
        &mut self,
        model: &Model,
        post: &mut GaussianPosterior,
        batch: &Dataset,
        lr: f64,
        seed: u64,
    ) -> Result<SabmaStepReport> {
        let sg = self.gradient(model, post, batch, seed)?;
        let flags = self.cfg.groups.flags();
        let mut theta = post.theta();
        for (g, ((param, grad), state)) in theta
            .groups_mut()
            .into_iter()
            .zip(sg.grad.groups())
            .zip(self.state.iter_mut())
            .enumerate()
        {
            if !flags[g] {
                continue;
            }
            let wd = if g == 0 { self.cfg.weight_decay } else { 0.0 };
            sgd_step(param, grad, lr, self.cfg.momentum, wd, state);
        }
        post.set_theta(theta);
        let pert: Vec<f64> = sg.perturbation.groups().iter().flat_map(|g| g.iter().copied()).collect();
        Ok(SabmaStepReport {
            loss: sg.loss,
            perturbation_norm: norm2(&pert),
        })
    }
}

/// One step of [`SabmaOptimizer`].
pub fn sabma_step(
    model: &Model,
    post: &mut GaussianPosterior,
    opt: &mut SabmaOptimizer,
    batch: &Dataset,
    lr: f64,
    seed: u64,
) -> Result<SabmaStepReport> {
    opt.step(model, post, batch, lr, seed)
}
