use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lanczos::{lanczos_topk, LanczosOptions, SpectrumReport};
use super::weyl::{weyl_certificate, WeylCertificate};
use crate::autodiff::{hvp, ParamVector};
use crate::error::Result;
use crate::models::{DataLoss, Dataset, Model};
use crate::posterior::GaussianPosterior;
use crate::seeds::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatnessMetrics {
    pub lambda1: f64,
    pub ratio_1_5: Option<f64>,
}

/// `(λ₁, λ₁/λ₅)`; the ratio is absent with fewer than five eigenvalues or
/// when `λ₅ = 0`.
pub fn flatness_metrics(report: &SpectrumReport) -> FlatnessMetrics {
    FlatnessMetrics {
        lambda1: report.eigenvalues.first().copied().unwrap_or(f64::NAN),
        ratio_1_5: super::lanczos::ratio(&report.eigenvalues),
    }
}

/// Per-sample spectra of the data-loss Hessian and their averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorFlatness {
    pub reports: Vec<SpectrumReport>,
    pub lambda1s: Vec<f64>,
    pub mean_lambda1: f64,
    /// Mean of the defined ratios; absent when none is defined.
    pub mean_ratio_1_5: Option<f64>,
}

impl PosteriorFlatness {
    pub fn from_reports(reports: Vec<SpectrumReport>) -> Self {
        let lambda1s: Vec<f64> = reports.iter().map(|r| r.lambda1).collect();
        let mean_lambda1 = lambda1s.iter().sum::<f64>() / lambda1s.len().max(1) as f64;
        let ratios: Vec<f64> = reports.iter().filter_map(|r| r.ratio_1_5).collect();
        let mean_ratio_1_5 = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
        PosteriorFlatness {
            reports,
            lambda1s,
            mean_lambda1,
            mean_ratio_1_5,
        }
    }
}

/// Spectrum of the mean data-loss Hessian (no weight decay) at `params`.
pub fn hessian_spectrum(model: &Model, params: &[f64], data: &Dataset, opts: &LanczosOptions) -> Result<SpectrumReport> {
    let obj = DataLoss { model, data };
    lanczos_topk(|v| hvp(&obj, params, v), params.len(), opts)
}

/// Draw `m` weight samples (sample `i` uses seed `derive(seed, BMA_SAMPLE, i)`)
/// and run Lanczos on each sample's loss Hessian over `data`. All runs share
/// the Lanczos start vector derived from `seed`.
pub fn posterior_flatness(
    model: &Model,
    post: &GaussianPosterior,
    data: &Dataset,
    m: usize,
    opts: &LanczosOptions,
    seed: u64,
) -> Result<PosteriorFlatness> {
    let samples: Vec<ParamVector> = (0..m)
        .map(|i| post.sample(derive_seed(seed, stream::BMA_SAMPLE, i as u64)))
        .collect();
    let opts = LanczosOptions {
        seed: derive_seed(seed, stream::LANCZOS, 0),
        ..*opts
    };
    let reports = samples
        .par_iter()
        .map(|w| hessian_spectrum(model, &w.values, data, &opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorFlatness::from_reports(reports))
}

/// Weyl certificate for the average of the sample Hessians: per-sample
/// `λ_max` from `lambda1s`, per-sample `λ_min` from Lanczos on the negated
/// operator, and the observed `λ_max` of the averaged operator.
pub fn sample_weyl_certificate(
    model: &Model,
    samples: &[ParamVector],
    lambda1s: &[f64],
    data: &Dataset,
    opts: &LanczosOptions,
) -> Result<WeylCertificate> {
    let obj = DataLoss { model, data };
    let one = LanczosOptions { k: 1, ..*opts };
    let lambda_mins = samples
        .par_iter()
        .map(|w| {
            let r = lanczos_topk(
                |v| Ok(hvp(&obj, &w.values, v)?.into_iter().map(|x| -x).collect()),
                w.len(),
                &one,
            )?;
            Ok(-r.lambda1)
        })
        .collect::<Result<Vec<f64>>>()?;
    let dim = samples.first().map_or(0, ParamVector::len);
    let m = samples.len() as f64;
    let averaged = lanczos_topk(
        |v| {
            let parts = samples
                .par_iter()
                .map(|w| hvp(&obj, &w.values, v))
                .collect::<Result<Vec<_>>>()?;
            let mut out = vec![0.0; v.len()];
            for p in parts {
                for (o, x) in out.iter_mut().zip(p) {
                    *o += x / m;
                }
            }
            Ok(out)
        },
        dim,
        &one,
    )?;
    weyl_certificate(lambda1s, &lambda_mins, averaged.lambda1)
}
