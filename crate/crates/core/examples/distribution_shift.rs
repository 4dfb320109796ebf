//! Accuracy and calibration under Gaussian input corruption of increasing
//! severity for a point model, SWAG and SA-BMA.
//!
//! cargo run --release --example distribution_shift

use sabma::harness::{run_experiment_with, ExperimentConfig, Mode};

fn main() -> sabma::Result<()> {
    println!("{:<10} {:>3} {:>7} {:>7} {:>7}", "mode", "sev", "acc", "ece", "nll");
    for mode in [Mode::Dnn, Mode::Swag, Mode::SabmaVi] {
        let mut cfg = ExperimentConfig::new(mode);
        cfg.eval.spectroscopy = false;
        cfg.eval.weyl = false;
        cfg.eval.orders.clear();
        let rep = run_experiment_with(&cfg, true)?;
        for s in &rep.shift {
            println!("{:<10} {:>3} {:>7.2} {:>7.4} {:>7.4}", format!("{mode:?}"), s.severity, s.acc, s.ece, s.nll);
        }
    }
    Ok(())
}
