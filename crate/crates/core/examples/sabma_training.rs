//! Transfer pipeline by hand: pretrain a point model on the source split,
//! convert it to a MOPED posterior over the normalization and head layers,
//! then fine-tune with sharpness-aware BMA steps and evaluate the BMA.
//!
//! cargo run --release --example sabma_training

use sabma::bma::{bma_predict, metrics};
use sabma::harness::{build_model, load_splits, train_point, train_sabma, ExperimentConfig, Mode, PointOptimizer};
use sabma::models::{partition_params, ParamPartition, PartitionPolicy};
use sabma::optimizers::{FimMode, LrSchedule, PerturbationConfig, SabmaConfig, TrainableGroups};
use sabma::posterior::moped_from_dnn;

fn main() -> sabma::Result<()> {
    let cfg = ExperimentConfig::new(Mode::SabmaVi);
    let r = cfg.resolved();
    let splits = load_splits(&cfg)?;
    let model = build_model(&cfg, &splits.train)?;

    let mut w = model.init_params(0);
    let all = ParamPartition::all(model.num_params());
    let pre = ExperimentConfig::new(Mode::Dnn).resolved();
    let sched = LrSchedule::constant(0.1, cfg.pretrain.epochs);
    train_point(&model, &mut w, &all, &splits.source, None, PointOptimizer::Sgd, &pre, &sched, cfg.pretrain.epochs, |_, _| Ok(()))?;
    println!("pretrained on {} source points", splits.source.len());

    let part = partition_params(&model, PartitionPolicy::NormHead);
    let mut post = moped_from_dnn(&w, &part, r.delta, r.alpha, r.rank)?;
    println!("p₁ = {} of {} parameters", post.dim(), model.num_params());

    let mut sc = SabmaConfig::new(PerturbationConfig::new(r.gamma, FimMode::SamelsonPosterior));
    sc.momentum = r.momentum;
    sc.weight_decay = r.weight_decay;
    sc.groups = TrainableGroups { lowrank: false, ..Default::default() };
    let sched = LrSchedule::constant(r.lr, cfg.epochs);
    let trace = train_sabma(&model, &mut post, sc, &splits.train, Some(&splits.valid), &sched, cfg.epochs, r.patience, 1)?;
    println!("{} epochs, final loss {:.4}", trace.epochs_run, trace.loss.last().copied().unwrap_or(f64::NAN));

    let samples: Vec<_> = (0..r.samples as u64).map(|i| post.sample(i)).collect();
    let p = bma_predict(&model, &samples, &splits.test.x)?;
    let m = metrics(&p, &splits.test.y)?;
    println!("BMA of {} samples: acc {:.2}  ece {:.4}  nll {:.4}", samples.len(), m.acc, m.ece, m.nll);
    Ok(())
}
