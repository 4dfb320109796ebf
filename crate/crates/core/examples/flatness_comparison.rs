//! SA-BMA (VI) versus SWAG on few-shot two-moons: mean λ₁ of the posterior
//! samples' Hessians and BMA test accuracy across seeds, with a one-sided
//! sign test on the per-seed λ₁ ordering.
//!
//! cargo run --release --example flatness_comparison -- [seeds]

use std::time::Instant;

use sabma::harness::{run_experiment_with, ExperimentConfig, Mode};

fn config(mode: Mode, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(mode);
    cfg.seed = seed;
    cfg.eval.weyl = false;
    cfg.eval.orders.clear();
    cfg.eval.severities.clear();
    cfg
}

/// P(X ≥ wins) for X ~ Binomial(n, 1/2).
fn sign_test(wins: u64, n: u64) -> f64 {
    let choose = |k: u64| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    (wins..=n).map(choose).sum::<f64>() / 2f64.powi(n as i32)
}

fn main() -> sabma::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let t = Instant::now();
    let mut wins = 0;
    let (mut l_vi, mut l_sw, mut a_vi, mut a_sw) = (0.0, 0.0, 0.0, 0.0);
    for seed in 0..seeds {
        let vi = run_experiment_with(&config(Mode::SabmaVi, seed), true)?;
        let sw = run_experiment_with(&config(Mode::Swag, seed), true)?;
        let lv = vi.spectrum.as_ref().map_or(f64::NAN, |s| s.mean_lambda1);
        let ls = sw.spectrum.as_ref().map_or(f64::NAN, |s| s.mean_lambda1);
        let av = vi.final_metrics.map_or(f64::NAN, |m| m.acc);
        let aw = sw.final_metrics.map_or(f64::NAN, |m| m.acc);
        wins += (lv <= ls) as u64;
        l_vi += lv;
        l_sw += ls;
        a_vi += av;
        a_sw += aw;
        println!("seed {seed:>2}: sabma_vi λ₁ {lv:>9.4} acc {av:>6.2} | swag λ₁ {ls:>9.4} acc {aw:>6.2}");
    }
    let n = seeds as f64;
    println!("mean sabma_vi: λ₁ {:.4}, acc {:.2}", l_vi / n, a_vi / n);
    println!("mean swag:     λ₁ {:.4}, acc {:.2}", l_sw / n, a_sw / n);
    println!(
        "sabma_vi flatter on {wins}/{seeds} seeds, sign test p = {:.4} ({:.1}s)",
        sign_test(wins, seeds),
        t.elapsed().as_secs_f64()
    );
    Ok(())
}
