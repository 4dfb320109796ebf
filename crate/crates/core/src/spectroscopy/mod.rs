//! Matrix-free Hessian eigenvalue estimation, flatness metrics and Weyl
//! bounds for averaged Hessians.

mod dense;
mod flatness;
mod lanczos;
mod weyl;

pub use dense::{dense_hessian, dense_hessian_unsymmetrized, DENSE_HESSIAN_LIMIT};
pub use flatness::{flatness_metrics, hessian_spectrum, posterior_flatness, sample_weyl_certificate, FlatnessMetrics, PosteriorFlatness};
pub use lanczos::{lanczos_topk, LanczosOptions, SpectrumReport};
pub use weyl::{weyl_certificate, WeylCertificate};
