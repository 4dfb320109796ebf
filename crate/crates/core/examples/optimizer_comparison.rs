//! Every training mode on the same few-shot task, summarized with the
//! comparison table used by the `compare` subcommand.
//!
//! cargo run --release --example optimizer_comparison -- [seeds]

use sabma::harness::{compare_reports, run_experiment_with, ExperimentConfig, Mode};

fn main() -> sabma::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let mut reports = Vec::new();
    for mode in [Mode::Dnn, Mode::Sam, Mode::Fsam, Mode::Swag, Mode::SabmaSwag, Mode::SabmaVi] {
        for seed in 0..seeds {
            let mut cfg = ExperimentConfig::new(mode);
            cfg.seed = seed;
            cfg.eval.weyl = false;
            cfg.eval.orders.clear();
            cfg.eval.severities.clear();
            cfg.eval.spectrum_samples = Some(5);
            reports.push((format!("{mode:?}/{seed}"), run_experiment_with(&cfg, true)?));
        }
    }
    print!("{}", compare_reports(&reports)?.to_text());
    Ok(())
}
