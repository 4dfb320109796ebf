use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, scale};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanczosOptions {
    pub k: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            k: 5,
            max_iters: 80,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// Top of the spectrum of a symmetric operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub lambda1: f64,
    /// `λ₁/λ₅`, present iff at least five eigenvalues and `λ₅ ≠ 0`.
    pub ratio_1_5: Option<f64>,
    pub iterations: usize,
    /// Ritz residual norm of each reported pair.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Largest Ritz value after each iteration.
    pub lambda1_history: Vec<f64>,
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for q in basis {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let n = norm2(&v);
        if n > 1e-8 {
            scale(1.0 / n, &mut v);
            return Some(v);
        }
    }
    None
}

/// Top-`k` eigenvalues of the implicit symmetric operator `apply` via
/// Lanczos with full reorthogonalization. An invariant subspace restarts
/// from a fresh random vector orthogonal to the basis. Converged when every
/// reported Ritz residual is below `tol · max(1, |λ₁|)`; otherwise the
/// report carries `converged = false` and the current Ritz values.
pub fn lanczos_topk<F>(apply: F, dim: usize, opts: &LanczosOptions) -> Result<SpectrumReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let k = opts.k;
    if k == 0 || k > dim || k > opts.max_iters {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= min(dim, max_iters); got k = {k}, dim = {dim}, max_iters = {}",
            opts.max_iters
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut history = Vec::new();
    let mut v = random_unit(dim, &mut rng, &basis).expect("dim >= 1");
    let mut ritz: (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut converged = false;
    let max_iters = opts.max_iters.min(dim);

    for _ in 0..max_iters {
        let mut w = apply(&v)?;
        if w.len() != dim {
            return Err(Error::Dimension(format!("operator returned {} entries for dim {dim}", w.len())));
        }
        if let Some((index, &value)) = w.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        let alpha = dot(&v, &w);
        axpy(-alpha, &v, &mut w);
        if let (Some(prev), Some(&b)) = (basis.last(), betas.last()) {
            axpy(-b, prev, &mut w);
        }
        basis.push(v);
        alphas.push(alpha);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let beta = norm2(&w);

        let m = alphas.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let res: Vec<f64> = order
            .iter()
            .map(|&i| (beta * eig.eigenvectors[(m - 1, i)]).abs())
            .collect();
        history.push(vals[0]);
        let threshold = opts.tol * vals[0].abs().max(1.0);
        ritz = (vals, res);

        let complete = m == dim;
        if m >= k && (complete || ritz.1[..k].iter().all(|&r| r < threshold)) {
            converged = true;
            break;
        }
        if beta <= 1e-12 * ritz.0[0].abs().max(1.0) {
            // invariant subspace: restart orthogonally, decoupled block
            match random_unit(dim, &mut rng, &basis) {
                Some(fresh) => {
                    betas.push(0.0);
                    v = fresh;
                }
                None => break,
            }
        } else {
            betas.push(beta);
            scale(1.0 / beta, &mut w);
            v = w;
        }
    }

    let (vals, res) = ritz;
    let take = k.min(vals.len());
    let eigenvalues = vals[..take].to_vec();
    let residuals = res[..take].to_vec();
    let ratio_1_5 = ratio(&eigenvalues);
    Ok(SpectrumReport {
        lambda1: eigenvalues[0],
        ratio_1_5,
        iterations: alphas.len(),
        residuals,
        converged,
        lambda1_history: history,
        eigenvalues,
    })
}

pub(crate) fn ratio(eigs: &[f64]) -> Option<f64> {
    if eigs.len() < 5 || eigs[4] == 0.0 {
        return None;
    }
    let r = eigs[0] / eigs[4];
    r.is_finite().then_some(r)
}
