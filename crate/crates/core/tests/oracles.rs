//! Frozen reference values. Exact and 20-digit values come from symbolic
//! derivations done outside the crate; the remaining checks use naive
//! scalar reimplementations written independently of the library code.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sabma::autodiff::{Matrix, ParamLayout, ParamVector};
use sabma::bma::metrics;
use sabma::models::{build_mlp, partition_params, DataLoss, Dataset, ParamPartition, PartitionPolicy};
use sabma::optimizers::{diag_predictive_fim, fsam_perturb, ng_step, sabma_perturb, DEFAULT_EPS};
use sabma::posterior::{elbo_loss, moped_from_dnn, swag_fit, DiagonalPrior, GaussianPosterior, SwagCollector};
use sabma::spectroscopy::{dense_hessian, hessian_spectrum, lanczos_topk, posterior_flatness, weyl_certificate, LanczosOptions};

fn close(got: f64, want: f64, tol: f64) {
    assert!((got - want).abs() <= tol * want.abs().max(1.0), "got {got:e}, want {want:e}");
}

fn close_all(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        close(*g, *w, tol);
    }
}

fn normals(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(r)).collect()
}

#[test]
fn samelson_single_group_exact() {
    // γ = 1/2, g = (1, 2, −2), ∇l = (3, −1, 4): gᵀ∇l = −7, ‖g‖² = 9
    let d = sabma_perturb(&[&[3.0, -1.0, 4.0]], &[&[1.0, 2.0, -2.0]], 0.5, DEFAULT_EPS);
    close_all(&d[0], &[-1.0 / 18.0, -1.0 / 9.0, 1.0 / 9.0], 1e-15);
    let norm = d[0].iter().map(|v| v * v).sum::<f64>().sqrt();
    close(norm, 0.5 / 3.0, 1e-15);
}

#[test]
fn samelson_two_groups_share_one_denominator() {
    // Δ₁ = (6/√37, 0), Δ₂ = (0, √37/111)
    let d = sabma_perturb(&[&[2.0, 1.0], &[1.0, 1.0]], &[&[1.0, 0.0], &[0.0, 3.0]], 1.0, DEFAULT_EPS);
    close_all(&d[0], &[0.986_393_923_832_143_7, 0.0], 1e-15);
    close_all(&d[1], &[0.0, 0.054_799_662_435_119_096], 1e-15);
}

fn three_dim_posterior() -> GaussianPosterior {
    let mut layout = ParamLayout::new();
    layout.push("w", vec![3]);
    GaussianPosterior::new(
        vec![0.25, -0.5, 1.0],
        vec![0.0, 2f64.ln(), -(2f64.ln())],
        vec![1.0, 0.0, 0.5, 1.0, -1.0, 0.5],
        2,
        ParamPartition::all(3),
        vec![],
        layout,
    )
    .unwrap()
}

#[test]
fn woodbury_log_density_symbolic() {
    let post = three_dim_posterior();
    let w = [1.0, 0.0, 0.5];
    close(post.log_density(&w).unwrap(), -3.194_814_684_653_117_7, 1e-13);
    let g = post.grad_log_density(&w).unwrap();
    close_all(&g.mu, &[0.574_074_074_074_074_07, 0.135_802_469_135_802_47, -0.283_950_617_283_950_6], 1e-13);
    close_all(&g.log_sigma, &[-0.612_997_256_515_775_03, -0.753_238_835_543_362_3, -0.243_007_925_621_094_35], 1e-13);
    close_all(
        &g.lowrank,
        &[
            0.043_552_812_071_330_59,
            -0.186_957_018_747_142_2,
            -0.011_202_560_585_276_635,
            -0.173_258_649_596_098_16,
            0.387_059_899_405_578_4,
            -0.455_913_732_662_703_86,
        ],
        1e-13,
    );
}

#[test]
fn unit_variance_log_density() {
    let mut layout = ParamLayout::new();
    layout.push("w", vec![1]);
    let post = GaussianPosterior::new(vec![0.0], vec![0.5 * 2f64.ln()], vec![], 0, ParamPartition::all(1), vec![], layout).unwrap();
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    close(post.log_density(&[0.0]).unwrap(), -half_log_2pi, 1e-15);
    close(post.log_density(&[1.0]).unwrap(), -half_log_2pi - 0.5, 1e-15);
    close(post.grad_log_density(&[1.0]).unwrap().mu[0], 1.0, 1e-15);
}

/// 2 → 3 (standardize, scale/shift, tanh) → 2 with params ((7i mod 11) − 5)/10.
fn symbolic_mlp() -> (sabma::models::Model, Dataset, Vec<f64>) {
    let model = build_mlp(2, &[3], 2, true).unwrap();
    let params: Vec<f64> = (0..23).map(|i| ((i * 7) % 11) as f64 / 10.0 - 0.5).collect();
    let x = Matrix::from_rows(&[vec![0.5, -1.0], vec![-0.25, 0.75], vec![1.5, 0.5]]).unwrap();
    (model, Dataset::new(x, vec![0, 1, 1], 2).unwrap(), params)
}

#[test]
fn mlp_loss_and_gradient_symbolic() {
    let (model, data, params) = symbolic_mlp();
    assert_eq!(model.num_params(), 23);
    let (loss, grad) = model.loss_and_grad(&params, &data).unwrap();
    close(loss, 0.684_361_863_650_249_97, 1e-14);
    let want = [
        0.073_662_251_042_490_5,
        0.026_530_365_021_962_072,
        -0.100_192_616_064_452_57,
        -0.080_590_583_515_813_45,
        -0.099_872_443_993_483_17,
        0.180_463_027_509_296_63,
        0.127_471_116_338_887_1,
        0.034_870_851_190_112_816,
        -0.162_341_967_528_999_9,
        0.154_173_788_899_942_64,
        -0.030_856_661_502_754_305,
        0.084_353_907_974_352_99,
        0.034_268_661_899_160_705,
        0.054_573_600_879_636_94,
        0.014_672_662_040_213_722,
        0.152_150_789_773_589_68,
        -0.152_150_789_773_589_68,
        -0.019_203_146_934_073_116,
        0.019_203_146_934_073_116,
        0.163_873_694_157_807_17,
        -0.163_873_694_157_807_17,
        0.137_780_047_391_522_18,
        -0.137_780_047_391_522_18,
    ];
    close_all(&grad, &want, 1e-12);
}

#[test]
fn weyl_two_by_two_symbolic() {
    // A₁ = [[2,1],[1,2]], A₂ = [[0,0],[0,−1]]
    let c = weyl_certificate(&[3.0, 0.0], &[1.0, -1.0], 1.309_016_994_374_947_4).unwrap();
    assert_eq!((c.lower, c.upper), (1.0, 1.5));
    assert!(c.pass);
}

#[test]
fn three_class_ece_nll_symbolic() {
    let p = Matrix::from_rows(&[
        vec![0.5, 0.3, 0.2],
        vec![0.1, 0.7, 0.2],
        vec![0.2, 0.1, 0.7],
        vec![0.45, 0.45, 0.1],
        vec![0.05, 0.05, 0.9],
    ])
    .unwrap();
    let m = metrics(&p, &[0, 2, 2, 1, 2]).unwrap();
    assert_eq!(m.acc, 60.0);
    close(m.ece, 0.29, 1e-15);
    close(m.nll, 0.712_625_649_761_675_2, 1e-15);
}

#[test]
fn swag_fit_hand_snapshots() {
    let mut layout = ParamLayout::new();
    layout.push("head.weight", vec![2]);
    let mut c = SwagCollector::new(ParamPartition::all(2), 2);
    for s in [[0.0, 1.0], [2.0, 0.0], [1.0, 3.0]] {
        c.collect(&ParamVector::new(layout.clone(), s.to_vec()).unwrap()).unwrap();
    }
    let post = swag_fit(&c).unwrap();
    close_all(&post.mu, &[1.0, 4.0 / 3.0], 1e-15);
    let var: Vec<f64> = post.sigma().iter().map(|s| s * s).collect();
    close_all(&var, &[2.0 / 3.0, 14.0 / 9.0], 1e-14);
    // columns: deviations of the last two snapshots, row-major p₁ × K
    close_all(&post.lowrank, &[1.0, 0.0, -0.5, 5.0 / 3.0], 1e-15);
}

#[test]
fn path_laplacian_spectrum() {
    let n = 12;
    let apply = |v: &[f64]| {
        Ok((0..n)
            .map(|i| {
                let left = if i > 0 { v[i - 1] } else { 0.0 };
                let right = if i + 1 < n { v[i + 1] } else { 0.0 };
                2.0 * v[i] - left - right
            })
            .collect())
    };
    let opts = LanczosOptions { k: 5, max_iters: 12, tol: 1e-12, seed: 0 };
    let r = lanczos_topk(apply, n, &opts).unwrap();
    let want = [3.941_883_634_852_104, 3.770_912_051_306_419_8, 3.497_021_496_342_202, 3.136_129_493_462_311_6, 2.709_209_774_085_071_3];
    close_all(&r.eigenvalues, &want, 1e-12);
}

#[test]
fn kl_shifted_mean_closed_form() {
    let (model, data, params) = symbolic_mlp();
    let part = partition_params(&model, PartitionPolicy::Head);
    let pv = ParamVector::new(model.layout().clone(), params).unwrap();
    let mut post = moped_from_dnn(&pv, &part, 0.05, 2.0, 0).unwrap();
    let prior = DiagonalPrior {
        mu: vec![0.0; post.dim()],
        var: vec![1.0; post.dim()],
    };
    // head entries: μ = 0, σ = √2, so N(0, 1) per coordinate
    post.mu[0] = 1.0;
    let w = post.mean_params();
    let base = elbo_loss(&model, &post, &prior, &data, &w, 0.0).unwrap();
    let with_kl = elbo_loss(&model, &post, &prior, &data, &w, 3.0).unwrap();
    close(with_kl - base, 1.5, 1e-14);
}

#[test]
fn moped_values() {
    let mut layout = ParamLayout::new();
    layout.push("norm1.scale", vec![2]);
    layout.push("head.weight", vec![1]);
    let pv = ParamVector::new(layout, vec![0.4, 0.0, 0.7]).unwrap();
    let post = moped_from_dnn(&pv, &ParamPartition::all(3), 0.05, 1e-4, 0).unwrap();
    close_all(&post.sigma(), &[0.02, 1e-6, 0.01], 1e-14);
    assert_eq!(post.mu, vec![0.4, 0.0, 0.0]);
}

#[test]
fn fsam_matches_scalar_reimplementation() {
    let mut r = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let n = r.random_range(1..20);
        let g = normals(&mut r, n);
        let f: Vec<f64> = (0..n).map(|_| r.random_range(0.0..3.0)).collect();
        let (gamma, eta) = (r.random_range(0.01..1.0), r.random_range(0.0..2.0));
        let got = fsam_perturb(&g, &f, gamma, eta, DEFAULT_EPS);
        let mut quad = 0.0;
        for i in 0..n {
            quad += g[i] * g[i] / (f[i] + eta);
        }
        for i in 0..n {
            let want = gamma * (g[i] / (f[i] + eta)) / quad.sqrt();
            assert!((got[i] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn ng_matches_scalar_reimplementation() {
    let mut r = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..200 {
        let n = r.random_range(1..20);
        let p0 = normals(&mut r, n);
        let g = normals(&mut r, n);
        let f: Vec<f64> = (0..n).map(|_| r.random_range(0.1..3.0)).collect();
        let lr = r.random_range(0.001..1.0);
        let mut p = p0.clone();
        ng_step(&mut p, &g, &f, lr, 1e-12);
        for i in 0..n {
            assert!((p[i] - (p0[i] - lr * g[i] / f[i])).abs() < 1e-12);
        }
    }
}

#[test]
fn nll_loss_matches_scalar_reimplementation() {
    let (model, data, params) = symbolic_mlp();
    let part = partition_params(&model, PartitionPolicy::NormHead);
    // naive forward: loops over samples, features and classes
    let at = |i: usize| params[i];
    let mut ce = 0.0;
    for s in 0..data.len() {
        let x = data.x.row(s);
        let z: Vec<f64> = (0..3).map(|j| x[0] * at(j) + x[1] * at(3 + j) + at(6 + j)).collect();
        let mean = z.iter().sum::<f64>() / 3.0;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0;
        let h: Vec<f64> = (0..3)
            .map(|j| (at(9 + j) * (z[j] - mean) / (var + 1e-5).sqrt() + at(12 + j)).tanh())
            .collect();
        let logits: Vec<f64> = (0..2).map(|c| (0..3).map(|j| h[j] * at(15 + 2 * j + c)).sum::<f64>() + at(21 + c)).collect();
        let lse = logits.iter().map(|l| l.exp()).sum::<f64>().ln();
        ce += lse - logits[data.y[s]];
    }
    ce /= data.len() as f64;
    let sq: f64 = part.trainable().iter().map(|&i| params[i] * params[i]).sum();
    let want = ce + 0.5 * 0.01 * sq;
    let got = model.nll_loss(&params, &data, 0.01, Some(&part)).unwrap();
    assert!((got - want).abs() <= 1e-12 * want.abs());
}

#[test]
fn diag_fim_matches_loop_over_examples() {
    let mut r = ChaCha8Rng::seed_from_u64(33);
    let model = build_mlp(3, &[4], 3, true).unwrap();
    let params = model.init_params(5).values;
    let n = 9;
    let x = Matrix::new(n, 3, normals(&mut r, n * 3)).unwrap();
    let data = Dataset::new(x, (0..n).map(|i| i % 3).collect(), 3).unwrap();
    let got = diag_predictive_fim(&model, &params, &data).unwrap();
    let mut want = vec![0.0; params.len()];
    for i in 0..n {
        let (_, g) = model.loss_and_grad(&params, &data.subset(&[i])).unwrap();
        for (w, v) in want.iter_mut().zip(&g) {
            *w += v * v;
        }
    }
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w / n as f64).abs() < 1e-12);
    }
}

#[test]
fn dense_hessian_self_check() {
    let model = build_mlp(2, &[4], 2, false).unwrap();
    assert!(model.num_params() >= 20);
    let params = model.init_params(9).values;
    let mut r = ChaCha8Rng::seed_from_u64(34);
    let x = Matrix::new(6, 2, normals(&mut r, 12)).unwrap();
    let data = Dataset::new(x, vec![0, 1, 0, 1, 1, 0], 2).unwrap();
    let h = sabma::spectroscopy::dense_hessian_unsymmetrized(&DataLoss { model: &model, data: &data }, &params).unwrap();
    let asym = (&h - h.transpose()).abs().max();
    assert!(asym < 1e-5, "asymmetry {asym:e}");
}

#[test]
fn posterior_flatness_matches_dense_oracle() {
    let model = build_mlp(2, &[4], 2, true).unwrap();
    assert!(model.num_params() <= 60);
    let base = model.init_params(3);
    let part = partition_params(&model, PartitionPolicy::NormHead);
    let post = moped_from_dnn(&base, &part, 0.05, 1e-2, 0).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(35);
    let x = Matrix::new(12, 2, normals(&mut r, 24)).unwrap();
    let data = Dataset::new(x, (0..12).map(|i| i % 2).collect(), 2).unwrap();
    let opts = LanczosOptions {
        k: 1,
        max_iters: model.num_params(),
        tol: 1e-10,
        seed: 0,
    };
    let seed = 17;
    let flat = posterior_flatness(&model, &post, &data, 3, &opts, seed).unwrap();
    for (i, rep) in flat.reports.iter().enumerate() {
        let w = post.sample(sabma::seeds::derive_seed(seed, sabma::seeds::stream::BMA_SAMPLE, i as u64));
        let h = dense_hessian(&DataLoss { model: &model, data: &data }, &w.values).unwrap();
        let top = SymmetricEigen::new(h).eigenvalues.max();
        assert!((rep.lambda1 - top).abs() <= 1e-6 * top.abs(), "sample {i}: {} vs {top}", rep.lambda1);
    }
    let single = hessian_spectrum(&model, &base.values, &data, &opts).unwrap();
    assert!(single.lambda1.is_finite());
}

#[test]
fn weyl_random_eight_by_eight_pairs() {
    let mut r = ChaCha8Rng::seed_from_u64(36);
    for _ in 0..1000 {
        let mats: Vec<DMatrix<f64>> = (0..2)
            .map(|_| {
                let a = DMatrix::from_vec(8, 8, normals(&mut r, 64));
                (&a + a.transpose()) * 0.5
            })
            .collect();
        let eig: Vec<_> = mats.iter().map(|a| SymmetricEigen::new(a.clone()).eigenvalues).collect();
        let avg = (&mats[0] + &mats[1]) * 0.5;
        let obs = SymmetricEigen::new(avg).eigenvalues.max();
        let c = weyl_certificate(&[eig[0].max(), eig[1].max()], &[eig[0].min(), eig[1].min()], obs).unwrap();
        assert!(c.pass);
    }
}
