//! Top Hessian eigenvalues of a trained classifier by matrix-free Lanczos,
//! compared with a dense eigendecomposition.
//!
//! cargo run --release --example hessian_spectrum

use nalgebra::SymmetricEigen;
use sabma::harness::{build_model, load_splits, train_point, ExperimentConfig, Mode, PointOptimizer};
use sabma::models::{DataLoss, ParamPartition};
use sabma::optimizers::LrSchedule;
use sabma::spectroscopy::{dense_hessian, flatness_metrics, hessian_spectrum, LanczosOptions};

fn main() -> sabma::Result<()> {
    let mut cfg = ExperimentConfig::new(Mode::Dnn);
    cfg.model.hidden = vec![8, 8];
    let r = cfg.resolved();
    let splits = load_splits(&cfg)?;
    let model = build_model(&cfg, &splits.train)?;
    let mut w = model.init_params(0);
    let part = ParamPartition::all(model.num_params());
    let sched = LrSchedule::constant(0.1, 300);
    train_point(&model, &mut w, &part, &splits.train, None, PointOptimizer::Sgd, &r, &sched, 300, |_, _| Ok(()))?;

    let opts = LanczosOptions { k: 5, max_iters: 80, tol: 1e-8, seed: 0 };
    let rep = hessian_spectrum(&model, &w.values, &splits.train, &opts)?;
    let f = flatness_metrics(&rep);
    println!("lanczos: {:?} after {} iterations", rep.eigenvalues, rep.iterations);
    println!("λ₁ = {:.6}, λ₁/λ₅ = {:?}", f.lambda1, f.ratio_1_5);

    let h = dense_hessian(&DataLoss { model: &model, data: &splits.train }, &w.values)?;
    let mut eig: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    println!("dense:   {:?}", &eig[..5]);
    Ok(())
}
