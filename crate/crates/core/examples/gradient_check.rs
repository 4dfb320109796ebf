//! Reverse-mode gradients and finite-difference Hessian-vector products of
//! a small normalized MLP, checked against central differences and a dense
//! Hessian.
//!
//! cargo run --release --example gradient_check

use sabma::autodiff::{finite_diff_grad, hvp, Matrix};
use sabma::models::{build_mlp, DataLoss, Dataset};
use sabma::spectroscopy::dense_hessian;

fn main() -> sabma::Result<()> {
    let model = build_mlp(2, &[5, 4], 3, true)?;
    let params = model.init_params(7).values;
    let x = Matrix::from_rows(&[vec![0.3, -1.2], vec![1.1, 0.4], vec![-0.8, 0.9], vec![0.0, 1.5]])?;
    let data = Dataset::new(x, vec![0, 1, 2, 1], 3)?;
    let obj = DataLoss { model: &model, data: &data };

    let (loss, grad) = model.loss_and_grad(&params, &data)?;
    let fd = finite_diff_grad(&obj, &params, 1e-5)?;
    let err = grad.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("{} parameters, loss {loss:.6}", params.len());
    println!("max |backward - central difference| = {err:.2e}");

    let v: Vec<f64> = (0..params.len()).map(|i| ((i % 7) as f64 - 3.0) / 3.0).collect();
    let hv = hvp(&obj, &params, &v)?;
    let h = dense_hessian(&obj, &params)?;
    let dense: Vec<f64> = (&h * nalgebra::DVector::from_column_slice(&v)).iter().copied().collect();
    let num: f64 = hv.iter().zip(&dense).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = dense.iter().map(|b| b * b).sum::<f64>().sqrt();
    println!("hvp vs dense Hessian: relative error {:.2e}", num / den);
    Ok(())
}
