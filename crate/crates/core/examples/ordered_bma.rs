//! Flatness-ordered model averaging: accuracy, ECE and NLL as samples are
//! added flattest-first, sharpest-first and in random order.
//!
//! cargo run --release --example ordered_bma

use sabma::harness::{run_experiment_with, ExperimentConfig, Mode};

fn main() -> sabma::Result<()> {
    let mut cfg = ExperimentConfig::new(Mode::Swag);
    cfg.seed = 3;
    cfg.eval.weyl = false;
    cfg.eval.severities.clear();
    let rep = run_experiment_with(&cfg, true)?;
    for b in &rep.bma {
        println!("{:?}", b.ordering);
        for p in b.prefix.iter().filter(|p| p.k == 1 || p.k % 5 == 0) {
            println!("  k {:>2}: acc {:6.2}  ece {:.4}  nll {:.4}", p.k, p.acc, p.ece, p.nll);
        }
    }
    Ok(())
}
