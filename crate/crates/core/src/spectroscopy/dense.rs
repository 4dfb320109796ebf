use nalgebra::DMatrix;

use crate::autodiff::{hvp_step, Objective};
use crate::error::{Error, Result};

/// Largest parameter count accepted by [`dense_hessian`].
pub const DENSE_HESSIAN_LIMIT: usize = 500;

/// Column `i` is the central difference of the gradient along `eᵢ`,
/// Richardson-extrapolated over steps `h` and `h/2` so the oracle's own
/// truncation error sits well below that of [`crate::autodiff::hvp`].
pub fn dense_hessian_unsymmetrized<O: Objective + ?Sized>(obj: &O, params: &[f64]) -> Result<DMatrix<f64>> {
    let n = params.len();
    if n > DENSE_HESSIAN_LIMIT {
        return Err(Error::HessianGuard {
            dim: n,
            limit: DENSE_HESSIAN_LIMIT,
        });
    }
    let h = hvp_step(params);
    let mut hess = DMatrix::zeros(n, n);
    let mut x = params.to_vec();
    let mut column = |i: usize, step: f64| -> Result<Vec<f64>> {
        x[i] = params[i] + step;
        let gp = obj.gradient(&x)?;
        x[i] = params[i] - step;
        let gm = obj.gradient(&x)?;
        x[i] = params[i];
        Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * step)).collect())
    };
    for i in 0..n {
        let coarse = column(i, h)?;
        let fine = column(i, h / 2.0)?;
        for j in 0..n {
            hess[(j, i)] = (4.0 * fine[j] - coarse[j]) / 3.0;
        }
    }
    Ok(hess)
}

/// Finite-difference Hessian symmetrized as `(H + Hᵀ)/2`.
pub fn dense_hessian<O: Objective + ?Sized>(obj: &O, params: &[f64]) -> Result<DMatrix<f64>> {
    let h = dense_hessian_unsymmetrized(obj, params)?;
    Ok((&h + h.transpose()) * 0.5)
}
