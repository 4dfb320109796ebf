//! Scalar objectives over flat parameter slices, Hessian-vector products
//! and finite-difference gradients.

use crate::error::{Error, Result};
use crate::linalg::{norm2, norm_inf};

/// A scalar function of a flat parameter vector with an analytic gradient.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// Adapter turning a pair of closures into an [`Objective`].
pub struct FnObjective<F, G> {
    dim: usize,
    f: F,
    g: G,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(dim: usize, f: F, g: G) -> Self {
        FnObjective { dim, f, g }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.g)(x))
    }
}

/// Step used for gradient differences: `1e-4 · (1 + ‖θ‖∞)`.
pub fn hvp_step(params: &[f64]) -> f64 {
    1e-4 * (1.0 + norm_inf(params))
}

/// Hessian-vector product by central differences of the analytic gradient
/// along the unit direction `v / ‖v‖`, rescaled by `‖v‖`.
pub fn hvp<O: Objective + ?Sized>(obj: &O, params: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != params.len() {
        return Err(Error::Dimension(format!(
            "hvp direction has {} entries, params have {}",
            v.len(),
            params.len()
        )));
    }
    let vn = norm2(v);
    if vn == 0.0 || !vn.is_finite() {
        return Err(Error::InvalidArgument("hvp direction must have positive finite norm".into()));
    }
    let h = hvp_step(params);
    let shift = |sign: f64| -> Vec<f64> {
        params
            .iter()
            .zip(v)
            .map(|(p, d)| p + sign * h * d / vn)
            .collect()
    };
    let gp = obj.gradient(&shift(1.0))?;
    let gm = obj.gradient(&shift(-1.0))?;
    let scale = vn / (2.0 * h);
    let out: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) * scale).collect();
    if let Some((index, &value)) = out.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    Ok(out)
}

/// Central-difference gradient of `obj.value`. Oracle use only.
pub fn finite_diff_grad<O: Objective + ?Sized>(obj: &O, params: &[f64], h: f64) -> Result<Vec<f64>> {
    if h <= 0.0 {
        return Err(Error::InvalidArgument(format!("finite-difference step {h} must be positive")));
    }
    let mut x = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = x[i];
        x[i] = orig + h;
        let fp = obj.value(&x)?;
        x[i] = orig - h;
        let fm = obj.value(&x)?;
        x[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite {
                index: i,
                value: if fp.is_finite() { fm } else { fp },
            });
        }
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}
