//! Diagonal plus low-rank Gaussian posterior: draws, empirical covariance
//! against (diag σ² + LLᵀ)/2, and the Woodbury log-density.
//!
//! cargo run --release --example posterior_sampling

use sabma::autodiff::ParamLayout;
use sabma::models::ParamPartition;
use sabma::posterior::GaussianPosterior;

fn main() -> sabma::Result<()> {
    let mut layout = ParamLayout::new();
    layout.push("head.weight", vec![3]);
    let post = GaussianPosterior::new(
        vec![0.5, -1.0, 0.0],
        vec![-0.5, 0.0, -1.0],
        vec![0.8, 0.0, -0.4, 0.6, 0.2, 0.3],
        2,
        ParamPartition::all(3),
        vec![],
        layout,
    )?;
    let n = 50_000;
    let draws: Vec<Vec<f64>> = (0..n).map(|i| post.sample(i).values).collect();
    let mean: Vec<f64> = (0..3).map(|j| draws.iter().map(|d| d[j]).sum::<f64>() / n as f64).collect();
    let sigma = post.dense_covariance();
    println!("mean {:?}", mean.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>());
    for i in 0..3 {
        let row: Vec<String> = (0..3)
            .map(|j| {
                let emp = draws.iter().map(|d| (d[i] - mean[i]) * (d[j] - mean[j])).sum::<f64>() / (n - 1) as f64;
                format!("{emp:.3} ({:.3})", sigma[(i, j)])
            })
            .collect();
        println!("cov row {i}: {}", row.join("  "));
    }
    for w in [post.mu.clone(), vec![1.0, 0.0, -0.5]] {
        println!("log p({w:?}) = {:.6}", post.log_density(&w)?);
    }
    println!("variational parameters: {} = (K+2)·p₁", post.num_variational());
    Ok(())
}
