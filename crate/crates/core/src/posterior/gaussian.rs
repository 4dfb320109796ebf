use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamLayout, ParamVector};
use crate::error::{Error, Result};
use crate::models::ParamPartition;

/// Largest accepted condition number of the K×K Woodbury core.
pub const MAX_CORE_CONDITION: f64 = 1e12;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// One vector per variational group: mean, log standard deviation and the
/// row-major `p₁ × K` low-rank factor. Used for values, gradients, scores
/// and perturbations alike.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Theta {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
    pub lowrank: Vec<f64>,
}

impl Theta {
    pub fn zeros_like(other: &Theta) -> Theta {
        Theta {
            mu: vec![0.0; other.mu.len()],
            log_sigma: vec![0.0; other.log_sigma.len()],
            lowrank: vec![0.0; other.lowrank.len()],
        }
    }

    pub fn groups(&self) -> [&[f64]; 3] {
        [&self.mu, &self.log_sigma, &self.lowrank]
    }

    pub fn groups_mut(&mut self) -> [&mut Vec<f64>; 3] {
        [&mut self.mu, &mut self.log_sigma, &mut self.lowrank]
    }

    /// `self + other` groupwise.
    pub fn plus(&self, other: &Theta) -> Theta {
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        Theta {
            mu: add(&self.mu, &other.mu),
            log_sigma: add(&self.log_sigma, &other.log_sigma),
            lowrank: add(&self.lowrank, &other.lowrank),
        }
    }
}

/// Standard-normal draws behind one reparameterized sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Noise {
    /// `z₁ ∈ ℝ^{p₁}`
    pub diag: Vec<f64>,
    /// `z₂ ∈ ℝ^K`
    pub lowrank: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
    /// Row-major `p₁ × K`.
    pub lowrank: Vec<f64>,
    pub rank: usize,
    pub partition: ParamPartition,
    pub frozen_values: Vec<f64>,
    pub registry: ParamLayout,
}

/// Factored pieces of `Σ = A + U Uᵀ`, `A = diag(σ²)/2`, `U = L/√2`.
struct Woodbury {
    a_inv: Vec<f64>,
    /// `A⁻¹ U`, row-major p₁×K
    a_inv_u: DMatrix<f64>,
    u: DMatrix<f64>,
    core_inv: DMatrix<f64>,
    logdet: f64,
}

impl GaussianPosterior {
    pub fn new(
        mu: Vec<f64>,
        log_sigma: Vec<f64>,
        lowrank: Vec<f64>,
        rank: usize,
        partition: ParamPartition,
        frozen_values: Vec<f64>,
        registry: ParamLayout,
    ) -> Result<Self> {
        let p1 = partition.num_trainable();
        if mu.len() != p1 || log_sigma.len() != p1 || lowrank.len() != p1 * rank {
            return Err(Error::Dimension(format!(
                "posterior groups (mu {}, log_sigma {}, L {}) do not match p1 = {p1}, K = {rank}",
                mu.len(),
                log_sigma.len(),
                lowrank.len()
            )));
        }
        if frozen_values.len() != partition.frozen().len() {
            return Err(Error::Dimension(format!(
                "{} frozen values for {} frozen slots",
                frozen_values.len(),
                partition.frozen().len()
            )));
        }
        if registry.len() != partition.total() {
            return Err(Error::Dimension(format!(
                "registry covers {} params, partition covers {}",
                registry.len(),
                partition.total()
            )));
        }
        Ok(GaussianPosterior {
            mu,
            log_sigma,
            lowrank,
            rank,
            partition,
            frozen_values,
            registry,
        })
    }

    /// `p₁`
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Number of variational parameters, `(K + 2)·p₁`.
    pub fn num_variational(&self) -> usize {
        (self.rank + 2) * self.dim()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.log_sigma.iter().map(|v| v.exp()).collect()
    }

    pub fn theta(&self) -> Theta {
        Theta {
            mu: self.mu.clone(),
            log_sigma: self.log_sigma.clone(),
            lowrank: self.lowrank.clone(),
        }
    }

    pub fn set_theta(&mut self, theta: Theta) {
        debug_assert_eq!(theta.mu.len(), self.mu.len());
        debug_assert_eq!(theta.lowrank.len(), self.lowrank.len());
        self.mu = theta.mu;
        self.log_sigma = theta.log_sigma;
        self.lowrank = theta.lowrank;
    }

    pub fn with_theta(&self, theta: Theta) -> Self {
        let mut out = self.clone();
        out.set_theta(theta);
        out
    }

    /// Draw `z₁ ~ N(0, I_{p₁})` then `z₂ ~ N(0, I_K)` from one seeded stream.
    pub fn draw_noise(&self, seed: u64) -> Noise {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let diag = (0..self.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let lowrank = (0..self.rank).map(|_| StandardNormal.sample(&mut rng)).collect();
        Noise { diag, lowrank }
    }

    /// `w_s = μ + (σ ⊙ z₁ + L z₂) / √2`
    pub fn trainable_sample(&self, noise: &Noise) -> Vec<f64> {
        let k = self.rank;
        (0..self.dim())
            .map(|i| {
                let lz: f64 = (0..k).map(|j| self.lowrank[i * k + j] * noise.lowrank[j]).sum();
                self.mu[i] + (self.log_sigma[i].exp() * noise.diag[i] + lz) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect()
    }

    /// Full parameter vector from trainable values plus the frozen point values.
    pub fn assemble(&self, trainable: &[f64]) -> ParamVector {
        ParamVector {
            registry: self.registry.clone(),
            values: self.partition.assemble(trainable, &self.frozen_values),
        }
    }

    pub fn sample_with(&self, noise: &Noise) -> ParamVector {
        self.assemble(&self.trainable_sample(noise))
    }

    pub fn sample(&self, seed: u64) -> ParamVector {
        self.sample_with(&self.draw_noise(seed))
    }

    /// Full parameter vector at the posterior mean.
    pub fn mean_params(&self) -> ParamVector {
        self.assemble(&self.mu)
    }

    /// Dense `(diag σ² + L Lᵀ)/2`; for tests and small diagnostics.
    pub fn dense_covariance(&self) -> DMatrix<f64> {
        let p = self.dim();
        let l = DMatrix::from_row_slice(p, self.rank, &self.lowrank);
        let mut cov = &l * l.transpose();
        for i in 0..p {
            cov[(i, i)] += (2.0 * self.log_sigma[i]).exp();
        }
        cov * 0.5
    }

    fn woodbury(&self) -> Result<Woodbury> {
        let p = self.dim();
        let k = self.rank;
        let a: Vec<f64> = self.log_sigma.iter().map(|s| 0.5 * (2.0 * s).exp()).collect();
        let a_inv: Vec<f64> = a.iter().map(|v| 1.0 / v).collect();
        let u = DMatrix::from_row_slice(p, k, &self.lowrank) * std::f64::consts::FRAC_1_SQRT_2;
        let mut a_inv_u = u.clone();
        for i in 0..p {
            for j in 0..k {
                a_inv_u[(i, j)] *= a_inv[i];
            }
        }
        let core = DMatrix::<f64>::identity(k, k) + u.transpose() * &a_inv_u;
        let mut logdet: f64 = a.iter().map(|v| v.ln()).sum();
        let core_inv = if k == 0 {
            core
        } else {
            let eig = SymmetricEigen::new(core.clone());
            let (lo, hi) = eig
                .eigenvalues
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
            if !(condition <= MAX_CORE_CONDITION) {
                return Err(Error::SingularCore { condition });
            }
            let chol = core.cholesky().ok_or(Error::SingularCore { condition })?;
            logdet += 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            chol.inverse()
        };
        Ok(Woodbury {
            a_inv,
            a_inv_u,
            u,
            core_inv,
            logdet,
        })
    }

    fn check_point(&self, w_s: &[f64]) -> Result<()> {
        if w_s.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point has {} entries, posterior has p1 = {}",
                w_s.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `Σ⁻¹ x` through the Woodbury identity.
    fn solve(wb: &Woodbury, x: &DVector<f64>) -> DVector<f64> {
        let t = DVector::from_iterator(x.len(), x.iter().zip(&wb.a_inv).map(|(v, a)| v * a));
        if wb.u.ncols() == 0 {
            return t;
        }
        let q = wb.u.transpose() * &t;
        let y = &wb.core_inv * q;
        t - &wb.a_inv_u * y
    }

    /// Exact Gaussian log-density of `w_s`, using only a K×K core solve.
    pub fn log_density(&self, w_s: &[f64]) -> Result<f64> {
        self.check_point(w_s)?;
        let wb = self.woodbury()?;
        let r = DVector::from_iterator(self.dim(), w_s.iter().zip(&self.mu).map(|(w, m)| w - m));
        let s = Self::solve(&wb, &r);
        let quad = r.dot(&s);
        Ok(-0.5 * (self.dim() as f64 * LN_2PI + wb.logdet + quad))
    }

    /// Gradients of [`log_density`](Self::log_density) with respect to μ,
    /// log σ and L, holding `w_s` fixed.
    pub fn grad_log_density(&self, w_s: &[f64]) -> Result<Theta> {
        self.check_point(w_s)?;
        let wb = self.woodbury()?;
        let p = self.dim();
        let k = self.rank;
        let r = DVector::from_iterator(p, w_s.iter().zip(&self.mu).map(|(w, m)| w - m));
        let s = Self::solve(&wb, &r);

        // diag(Σ⁻¹)_i = 1/a_i − (A⁻¹U)_i C⁻¹ (A⁻¹U)_iᵀ
        let m_cinv = &wb.a_inv_u * &wb.core_inv;
        let diag_inv: Vec<f64> = (0..p)
            .map(|i| wb.a_inv[i] - (0..k).map(|j| m_cinv[(i, j)] * wb.a_inv_u[(i, j)]).sum::<f64>())
            .collect();
        let sigma2: Vec<f64> = self.log_sigma.iter().map(|v| (2.0 * v).exp()).collect();
        let g_log_sigma = (0..p).map(|i| 0.5 * sigma2[i] * (s[i] * s[i] - diag_inv[i])).collect();

        // ∂/∂L = ½ (s sᵀ L − Σ⁻¹ L), Σ⁻¹ L = √2 (A⁻¹U − A⁻¹U C⁻¹ Uᵀ A⁻¹ U)
        let mut g_lowrank = vec![0.0; p * k];
        if k > 0 {
            let l = DMatrix::from_row_slice(p, k, &self.lowrank);
            let sigma_inv_u = &wb.a_inv_u - &m_cinv * (wb.u.transpose() * &wb.a_inv_u);
            let sigma_inv_l = sigma_inv_u * std::f64::consts::SQRT_2;
            let st_l = l.transpose() * &s;
            for i in 0..p {
                for j in 0..k {
                    g_lowrank[i * k + j] = 0.5 * (s[i] * st_l[j] - sigma_inv_l[(i, j)]);
                }
            }
        }
        Ok(Theta {
            mu: s.iter().copied().collect(),
            log_sigma: g_log_sigma,
            lowrank: g_lowrank,
        })
    }
}
