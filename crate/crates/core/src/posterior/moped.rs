use super::gaussian::GaussianPosterior;
use crate::autodiff::ParamVector;
use crate::error::{Error, Result};
use crate::models::{Dataset, Model, ParamPartition};

/// Smallest σ produced from a zero-valued pretrained weight.
pub const MOPED_SIGMA_FLOOR: f64 = 1e-6;

/// Convert point weights into a mean-field posterior with `σ = δ·|w|`,
/// then reset every `head.*` entry to the prior `N(0, α)`. The low-rank
/// factor starts at zero with `rank` columns.
pub fn moped_from_dnn(
    params: &ParamVector,
    partition: &ParamPartition,
    delta: f64,
    alpha: f64,
    rank: usize,
) -> Result<GaussianPosterior> {
    if !(delta > 0.0) || !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "MOPED needs delta > 0 and alpha > 0 (got {delta}, {alpha})"
        )));
    }
    if params.len() != partition.total() {
        return Err(Error::Dimension(format!(
            "{} params for a partition over {}",
            params.len(),
            partition.total()
        )));
    }
    let mut is_head = vec![false; params.len()];
    for e in params.registry.entries().iter().filter(|e| e.name.starts_with("head.")) {
        for i in e.range() {
            is_head[i] = true;
        }
    }
    let p1 = partition.num_trainable();
    let mut mu = Vec::with_capacity(p1);
    let mut log_sigma = Vec::with_capacity(p1);
    for &i in partition.trainable() {
        if is_head[i] {
            mu.push(0.0);
            log_sigma.push(0.5 * alpha.ln());
        } else {
            let w = params.values[i];
            mu.push(w);
            log_sigma.push((delta * w.abs()).max(MOPED_SIGMA_FLOOR).ln());
        }
    }
    GaussianPosterior::new(
        mu,
        log_sigma,
        vec![0.0; p1 * rank],
        rank,
        partition.clone(),
        partition.gather_frozen(&params.values),
        params.registry.clone(),
    )
}

/// Mean-field reference `N(μ₀, diag v₀)` recorded from an initial posterior,
/// with `v₀ = σ₀²/2` (the diagonal part of its covariance).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPrior {
    pub mu: Vec<f64>,
    pub var: Vec<f64>,
}

impl DiagonalPrior {
    pub fn from_posterior(post: &GaussianPosterior) -> Self {
        DiagonalPrior {
            mu: post.mu.clone(),
            var: post.log_sigma.iter().map(|s| 0.5 * (2.0 * s).exp()).collect(),
        }
    }
}

/// `KL[N(μ, diag σ²/2) ‖ prior]`; the low-rank part is ignored.
pub fn kl_to_prior(post: &GaussianPosterior, prior: &DiagonalPrior) -> f64 {
    post.mu
        .iter()
        .zip(&post.log_sigma)
        .zip(prior.mu.iter().zip(&prior.var))
        .map(|((m, ls), (m0, v0))| {
            let v = 0.5 * (2.0 * ls).exp();
            0.5 * (v / v0 + (m - m0) * (m - m0) / v0 - 1.0 + (v0 / v).ln())
        })
        .sum()
}

/// Gradient of [`kl_to_prior`] for the μ and log σ groups.
pub fn kl_to_prior_grad(post: &GaussianPosterior, prior: &DiagonalPrior) -> (Vec<f64>, Vec<f64>) {
    let mut g_mu = Vec::with_capacity(post.dim());
    let mut g_ls = Vec::with_capacity(post.dim());
    for ((m, ls), (m0, v0)) in post.mu.iter().zip(&post.log_sigma).zip(prior.mu.iter().zip(&prior.var)) {
        let v = 0.5 * (2.0 * ls).exp();
        g_mu.push((m - m0) / v0);
        g_ls.push(v / v0 - 1.0);
    }
    (g_mu, g_ls)
}

/// `NLL(batch; w) + β · KL[post ‖ prior]` at a sampled `w`.
pub fn elbo_loss(
    model: &Model,
    post: &GaussianPosterior,
    prior: &DiagonalPrior,
    batch: &Dataset,
    sample_w: &ParamVector,
    beta: f64,
) -> Result<f64> {
    let nll = model.data_loss(&sample_w.values, batch)?;
    if beta == 0.0 {
        return Ok(nll);
    }
    Ok(nll + beta * kl_to_prior(post, prior))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Matrix, ParamLayout};
    use crate::models::{build_mlp, partition_params, PartitionPolicy};

    fn pv(names: &[(&str, Vec<f64>)]) -> ParamVector {
        let mut reg = ParamLayout::new();
        let mut values = Vec::new();
        for (n, v) in names {
            reg.push(*n, vec![v.len()]);
            values.extend_from_slice(v);
        }
        ParamVector::new(reg, values).unwrap()
    }

    #[test]
    fn sigma_proportional_to_weight() {
        let p = pv(&[("norm1.scale", vec![0.4, 0.0, -2.0]), ("head.bias", vec![3.0])]);
        let post = moped_from_dnn(&p, &ParamPartition::all(4), 0.05, 1e-4, 5).unwrap();
        let s = post.sigma();
        assert!((s[0] - 0.02).abs() < 1e-15);
        assert!((s[1] - 1e-6).abs() < 1e-20);
        assert!((s[2] - 0.1).abs() < 1e-15);
        assert_eq!(post.mu[3], 0.0);
        assert!((s[3] - 0.01).abs() < 1e-15);
        assert_eq!(post.num_variational(), 7 * 4);
        assert!(post.lowrank.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_non_positive_hyperparameters() {
        let p = pv(&[("head.bias", vec![1.0])]);
        assert!(moped_from_dnn(&p, &ParamPartition::all(1), 0.0, 1.0, 0).is_err());
        assert!(moped_from_dnn(&p, &ParamPartition::all(1), 0.05, -1.0, 0).is_err());
    }

    #[test]
    fn kl_shifted_unit_gaussian() {
        let p = pv(&[("head.bias", vec![0.0])]);
        let mut post = moped_from_dnn(&p, &ParamPartition::all(1), 0.05, 2.0, 0).unwrap();
        // σ = √2 so the diagonal variance σ²/2 is 1
        let prior = DiagonalPrior::from_posterior(&post);
        assert!(kl_to_prior(&post, &prior).abs() < 1e-15);
        post.mu[0] = 1.0;
        assert!((kl_to_prior(&post, &prior) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn elbo_adds_beta_times_kl() {
        let model = build_mlp(2, &[3], 2, true).unwrap();
        let params = model.init_params(1);
        let part = partition_params(&model, PartitionPolicy::NormHead);
        let mut post = moped_from_dnn(&params, &part, 0.05, 1e-2, 0).unwrap();
        let prior = DiagonalPrior::from_posterior(&post);
        let batch = Dataset::new(
            Matrix::from_rows(&[vec![0.1, 0.9], vec![-1.0, 0.3]]).unwrap(),
            vec![0, 1],
            2,
        )
        .unwrap();
        let w = post.sample(5);
        let nll = model.nll_loss(&w.values, &batch, 0.0, None).unwrap();
        assert_eq!(elbo_loss(&model, &post, &prior, &batch, &w, 0.0).unwrap(), nll);
        assert!((elbo_loss(&model, &post, &prior, &batch, &w, 3.0).unwrap() - nll).abs() < 1e-15);
        post.mu[0] += 0.1;
        let kl = kl_to_prior(&post, &prior);
        assert!(kl > 0.0);
        let l = elbo_loss(&model, &post, &prior, &batch, &w, 2.0).unwrap();
        assert!((l - nll - 2.0 * kl).abs() < 1e-12);
    }
}
