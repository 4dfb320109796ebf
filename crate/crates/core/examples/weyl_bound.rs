//! Sandwich bound on the top eigenvalue of the averaged Hessian of
//! posterior samples: per-sample λmax and λmin bound λmax of the average.
//!
//! cargo run --release --example weyl_bound

use sabma::harness::{run_experiment_with, ExperimentConfig, Mode};

fn main() -> sabma::Result<()> {
    let mut cfg = ExperimentConfig::new(Mode::SabmaVi);
    cfg.eval.spectrum_samples = Some(8);
    cfg.eval.orders.clear();
    cfg.eval.severities.clear();
    let rep = run_experiment_with(&cfg, true)?;
    let c = rep.weyl.expect("weyl enabled");
    for (i, (hi, lo)) in c.lambda_maxes.iter().zip(&c.lambda_mins).enumerate() {
        println!("sample {i}: λmax {hi:>9.5}  λmin {lo:>9.5}");
    }
    println!(
        "lower {:.5} <= λmax(mean Hessian) {:.5} <= upper {:.5}: {}",
        c.lower,
        c.observed_lambda_max,
        c.upper,
        if c.pass { "holds" } else { "VIOLATED" }
    );
    Ok(())
}
