//! Ascent perturbations. Every normalizing denominator below `eps` yields a
//! zero perturbation instead of an error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::posterior::Theta;

pub const DEFAULT_EPS: f64 = 1e-12;
pub const DEFAULT_ETA_FISHER: f64 = 1.0;

/// Metric used to shape the perturbation ball on θ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FimMode {
    /// Euclidean ball: a SAM step on the trainable variational groups.
    Identity,
    /// Diagonal empirical predictive Fisher on μ (regularized by
    /// `eta_fisher`), identity on the other groups.
    DiagonalPredictive,
    /// Per-group rank-one posterior Fisher with its Samelson inverse.
    #[default]
    SamelsonPosterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub gamma: f64,
    #[serde(default)]
    pub fim_mode: FimMode,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_eta_fisher")]
    pub eta_fisher: f64,
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

fn default_eta_fisher() -> f64 {
    DEFAULT_ETA_FISHER
}

impl PerturbationConfig {
    pub fn new(gamma: f64, fim_mode: FimMode) -> Self {
        PerturbationConfig {
            gamma,
            fim_mode,
            eps: DEFAULT_EPS,
            eta_fisher: DEFAULT_ETA_FISHER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !(self.eps > 0.0) || !(self.eta_fisher >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "perturbation needs gamma >= 0, eps > 0, eta_fisher >= 0 (got {}, {}, {})",
                self.gamma, self.eps, self.eta_fisher
            )));
        }
        Ok(())
    }
}

/// `γ ∇l / ‖∇l‖₂`
pub fn sam_perturb(grad: &[f64], gamma: f64, eps: f64) -> Vec<f64> {
    let n = norm2(grad);
    if !(n > eps) {
        return vec![0.0; grad.len()];
    }
    grad.iter().map(|g| gamma * g / n).collect()
}

/// `γ F⁻¹∇l / ‖F^{-1/2}∇l‖₂` with `F = diag_fim + eta_fisher`.
pub fn fsam_perturb(grad: &[f64], diag_fim: &[f64], gamma: f64, eta_fisher: f64, eps: f64) -> Vec<f64> {
    assert_eq!(grad.len(), diag_fim.len(), "fisher length");
    let precond: Vec<f64> = grad
        .iter()
        .zip(diag_fim)
        .map(|(g, f)| g / (f + eta_fisher).max(eps))
        .collect();
    let denom = dot(grad, &precond).max(0.0).sqrt();
    if !(denom > eps) {
        return vec![0.0; grad.len()];
    }
    precond.iter().map(|v| gamma * v / denom).collect()
}

/// Per-group Samelson-inverse perturbation with one global denominator.
///
/// For each group `g` with score `s_g` and loss gradient `d_g`,
/// `c_g = s_g·d_g`, numerator `s_g c_g / ‖s_g‖⁴`, and
/// `D = √(Σ_g c_g² / ‖s_g‖⁴)`. Groups whose score norm is below `eps`
/// contribute nothing.
pub fn sabma_perturb(loss_grads: &[&[f64]], scores: &[&[f64]], gamma: f64, eps: f64) -> Vec<Vec<f64>> {
    assert_eq!(loss_grads.len(), scores.len(), "group count");
    let mut coef = Vec::with_capacity(scores.len());
    let mut total = 0.0;
    for (d, s) in loss_grads.iter().zip(scores) {
        assert_eq!(d.len(), s.len(), "group shape");
        let n2 = dot(s, s);
        if !(n2.sqrt() >= eps) {
            coef.push(0.0);
            continue;
        }
        let c = dot(s, d);
        let n4 = n2 * n2;
        total += c * c / n4;
        coef.push(c / n4);
    }
    let denom = total.sqrt();
    if !(denom > eps) {
        return scores.iter().map(|s| vec![0.0; s.len()]).collect();
    }
    scores
        .iter()
        .zip(&coef)
        .map(|(s, c)| s.iter().map(|v| gamma * v * c / denom).collect())
        .collect()
}

/// Perturbation on the trainable groups of θ under `cfg.fim_mode`.
///
/// `trained` flags the (μ, log σ, L) groups; untrained groups get zeros.
/// `score` is required for [`FimMode::SamelsonPosterior`] and
/// `fisher_mu` (diagonal predictive Fisher on the trainable slots) for
/// [`FimMode::DiagonalPredictive`].
pub fn theta_perturbation(
    cfg: &PerturbationConfig,
    loss_grad: &Theta,
    score: Option<&Theta>,
    fisher_mu: Option<&[f64]>,
    trained: [bool; 3],
) -> Result<Theta> {
    let mut out = Theta::zeros_like(loss_grad);
    let grads = loss_grad.groups();
    let active: Vec<usize> = (0..3).filter(|&g| trained[g] && !grads[g].is_empty()).collect();
    match cfg.fim_mode {
        FimMode::Identity => {
            let flat: Vec<f64> = active.iter().flat_map(|&g| grads[g].iter().copied()).collect();
            let delta = sam_perturb(&flat, cfg.gamma, cfg.eps);
            let mut offset = 0;
            let groups = out.groups_mut();
            for &g in &active {
                let n = grads[g].len();
                groups[g].copy_from_slice(&delta[offset..offset + n]);
                offset += n;
            }
        }
        FimMode::DiagonalPredictive => {
            let fisher = fisher_mu.ok_or_else(|| {
                Error::InvalidArgument("diagonal_predictive mode needs the predictive Fisher".into())
            })?;
            if fisher.len() != loss_grad.mu.len() {
                return Err(Error::Dimension(format!(
                    "fisher has {} entries, mu has {}",
                    fisher.len(),
                    loss_grad.mu.len()
                )));
            }
            // block-diagonal metric: F on μ, identity elsewhere
            let mut precond: Vec<Vec<f64>> = vec![Vec::new(); 3];
            let mut quad = 0.0;
            for &g in &active {
                let p: Vec<f64> = if g == 0 {
                    grads[0]
                        .iter()
                        .zip(fisher)
                        .map(|(d, f)| d / (f + cfg.eta_fisher).max(cfg.eps))
                        .collect()
                } else {
                    grads[g].to_vec()
                };
                quad += dot(grads[g], &p);
                precond[g] = p;
            }
            let denom = quad.max(0.0).sqrt();
            if denom > cfg.eps {
                let groups = out.groups_mut();
                for &g in &active {
                    for (o, v) in groups[g].iter_mut().zip(&precond[g]) {
                        *o = cfg.gamma * v / denom;
                    }
                }
            }
        }
        FimMode::SamelsonPosterior => {
            let score = score.ok_or_else(|| {
                Error::InvalidArgument("samelson_posterior mode needs the posterior score".into())
            })?;
            let sg = score.groups();
            for &g in &active {
                if sg[g].len() != grads[g].len() {
                    return Err(Error::Dimension(format!("score group {g} shape mismatch")));
                }
            }
            let d: Vec<&[f64]> = active.iter().map(|&g| grads[g]).collect();
            let s: Vec<&[f64]> = active.iter().map(|&g| sg[g]).collect();
            let delta = sabma_perturb(&d, &s, cfg.gamma, cfg.eps);
            let groups = out.groups_mut();
            for (&g, dg) in active.iter().zip(delta) {
                *groups[g] = dg;
            }
        }
    }
    Ok(out)
}
