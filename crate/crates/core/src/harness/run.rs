use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DatasetKind, ExperimentConfig, Mode, ResolvedOptim};
use super::data::{corrupt, gen_dataset, load_csv, Generator};
use crate::autodiff::ParamVector;
use crate::bma::{average_probs, metrics, ordered_bma_from_probs, sample_probs, BmaOrder, BmaReport, Metrics};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::models::{partition_params, Dataset, Model, ParamPartition};
use crate::optimizers::{
    diag_predictive_fim, fsam_perturb, reparam_gradient, sam_perturb, sgd_step, LrSchedule, PerturbationConfig,
    SabmaConfig, SabmaOptimizer, ScheduleKind, SgdState, DEFAULT_EPS,
};
use crate::posterior::{moped_from_dnn, save_posterior, swag_fit, GaussianPosterior, SwagCollector};
use crate::seeds::{derive_seed, stream};
use crate::spectroscopy::{
    hessian_spectrum, posterior_flatness, sample_weyl_certificate, LanczosOptions, PosteriorFlatness, WeylCertificate,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Per-epoch record of one training phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub epochs_run: usize,
    /// Epoch whose state was kept, when early stopping tracked one.
    pub best_epoch: Option<usize>,
    pub loss: Vec<f64>,
    pub val_nll: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftPoint {
    pub severity: u8,
    pub acc: f64,
    pub ece: f64,
    pub nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub canonical: bool,
    pub complete: bool,
    pub error: Option<String>,
    pub mode: Mode,
    /// Stored trainable numbers: `(K+2)·p₁` for posteriors, `p₁` for point modes.
    pub trainable_params: usize,
    pub p1: usize,
    pub total_params: usize,
    pub pretrain: Option<TrainingTrace>,
    pub conversion: Option<TrainingTrace>,
    pub training: Option<TrainingTrace>,
    pub train_metrics: Option<Metrics>,
    pub final_metrics: Option<Metrics>,
    pub bma: Vec<BmaReport>,
    pub spectrum: Option<PosteriorFlatness>,
    pub weyl: Option<WeylCertificate>,
    pub shift: Vec<ShiftPoint>,
    /// Omitted from canonical reports.
    pub wall_clock_secs: Option<f64>,
}

impl RunReport {
    fn empty(cfg: &ExperimentConfig, canonical: bool) -> Self {
        let mut config = cfg.clone();
        if canonical {
            config.out = None;
        }
        RunReport {
            schema_version: SCHEMA_VERSION,
            config,
            config_hash: cfg.hash(),
            canonical,
            complete: false,
            error: None,
            mode: cfg.mode,
            trainable_params: 0,
            p1: 0,
            total_params: 0,
            pretrain: None,
            conversion: None,
            training: None,
            train_metrics: None,
            final_metrics: None,
            bma: Vec::new(),
            spectrum: None,
            weyl: None,
            shift: Vec::new(),
            wall_clock_secs: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let found = value.get("schema_version").and_then(|v| v.as_u64());
        if found != Some(SCHEMA_VERSION as u64) {
            return Err(Error::SchemaVersion {
                path: path.display().to_string(),
                found: found.map_or(0, |v| v as u32),
                expected: SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }
}

/// Train, validation, test and source splits of one experiment.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
    pub source: Dataset,
}

pub fn load_splits(cfg: &ExperimentConfig) -> Result<Splits> {
    let d = &cfg.dataset;
    let seed = cfg.data_seed();
    if d.kind == DatasetKind::Csv {
        let path = d.path.as_ref().ok_or_else(|| Error::Config("dataset.path is required for csv".into()))?;
        let train = load_csv(path)?;
        let test = match &d.test_path {
            Some(p) => load_csv(p)?,
            None => train.clone(),
        };
        return Ok(Splits {
            valid: train.clone(),
            source: train.clone(),
            train,
            test,
        });
    }
    let g = Generator {
        kind: d.kind,
        noise: d.noise,
        classes: d.classes,
        dim: d.dim,
        separation: d.separation,
    };
    let (train, test) = gen_dataset(&g, d.n_per_class, seed)?;
    Ok(Splits {
        train,
        test,
        valid: g.sample(d.n_per_class, derive_seed(seed, stream::DATA_VALID, 0))?,
        source: g.sample(cfg.pretrain.n_per_class.max(1), derive_seed(seed, stream::DATA_SOURCE, 0))?,
    })
}

pub fn build_model(cfg: &ExperimentConfig, data: &Dataset) -> Result<Model> {
    let m = &cfg.model;
    Model::new(
        data.x.cols(),
        &m.hidden,
        data.classes,
        vec![m.norm; m.hidden.len()],
        m.activation,
    )
}

fn schedule(kind: ScheduleKind, base_lr: f64, epochs: usize) -> LrSchedule {
    LrSchedule {
        kind,
        base_lr,
        warmup_steps: if kind == ScheduleKind::CosineWarmup { epochs / 10 } else { 0 },
        ..LrSchedule::constant(base_lr, epochs)
    }
}

/// Keeps the best state by validation NLL and signals when patience runs out.
struct EarlyStop<T> {
    patience: usize,
    best: Option<(usize, f64, T)>,
}

impl<T: Clone> EarlyStop<T> {
    fn new(patience: usize) -> Self {
        EarlyStop { patience, best: None }
    }

    /// Returns true when training should stop.
    fn observe(&mut self, epoch: usize, nll: f64, state: &T) -> bool {
        if self.patience == 0 {
            return false;
        }
        match &self.best {
            Some((_, best, _)) if !(nll < *best) => {}
            _ => self.best = Some((epoch, nll, state.clone())),
        }
        let best_epoch = self.best.as_ref().map_or(epoch, |b| b.0);
        epoch - best_epoch >= self.patience
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointOptimizer {
    Sgd,
    Sam,
    Fsam,
}

/// Full-batch point training of the trainable slots. `on_epoch` sees the
/// weights after every epoch.
#[allow(clippy::too_many_arguments)]
pub fn train_point(
    model: &Model,
    w: &mut ParamVector,
    part: &ParamPartition,
    data: &Dataset,
    valid: Option<&Dataset>,
    opt: PointOptimizer,
    r: &ResolvedOptim,
    sched: &LrSchedule,
    epochs: usize,
    mut on_epoch: impl FnMut(usize, &ParamVector) -> Result<()>,
) -> Result<TrainingTrace> {
    let mut trace = TrainingTrace::default();
    let mut state = SgdState::new(part.num_trainable());
    let mut stop = EarlyStop::new(if valid.is_some() { r.patience } else { 0 });
    for epoch in 0..epochs {
        let (loss, full) = model.loss_and_grad(&w.values, data)?;
        let g = part.gather_trainable(&full);
        let g = match opt {
            PointOptimizer::Sgd => g,
            PointOptimizer::Sam | PointOptimizer::Fsam => {
                let eps = if opt == PointOptimizer::Sam {
                    sam_perturb(&g, r.gamma, DEFAULT_EPS)
                } else {
                    let fim = part.gather_trainable(&diag_predictive_fim(model, &w.values, data)?);
                    fsam_perturb(&g, &fim, r.gamma, r.eta_fisher, DEFAULT_EPS)
                };
                let mut shifted = w.values.clone();
                for (&i, e) in part.trainable().iter().zip(&eps) {
                    shifted[i] += e;
                }
                part.gather_trainable(&model.loss_and_grad(&shifted, data)?.1)
            }
        };
        let mut theta = part.gather_trainable(&w.values);
        sgd_step(&mut theta, &g, sched.at(epoch)?, r.momentum, r.weight_decay, &mut state);
        w.values = part.assemble(&theta, &part.gather_frozen(&w.values));
        check_finite(&w.values)?;
        trace.loss.push(loss);
        trace.epochs_run = epoch + 1;
        on_epoch(epoch, w)?;
        if let Some(v) = valid {
            let nll = model.data_loss(&w.values, v)?;
            trace.val_nll.push(nll);
            if stop.observe(epoch, nll, w) {
                break;
            }
        }
    }
    if let Some((epoch, _, best)) = stop.best {
        *w = best;
        trace.best_epoch = Some(epoch);
    }
    Ok(trace)
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        Some((index, &value)) => Err(Error::NonFinite { index, value }),
        None => Ok(()),
    }
}

/// SA-BMA fine-tuning with early stopping on the validation NLL of the
/// posterior mean. Step `t` draws its noise from `derive(seed, STEP_NOISE, t)`.
#[allow(clippy::too_many_arguments)]
pub fn train_sabma(
    model: &Model,
    post: &mut GaussianPosterior,
    cfg: SabmaConfig,
    data: &Dataset,
    valid: Option<&Dataset>,
    sched: &LrSchedule,
    epochs: usize,
    patience: usize,
    seed: u64,
) -> Result<TrainingTrace> {
    let mut opt = SabmaOptimizer::new(cfg, post);
    train_posterior(model, post, valid, epochs, patience, |post, epoch| {
        let lr = sched.at(epoch)?;
        Ok(opt.step(model, post, data, lr, derive_seed(seed, stream::STEP_NOISE, epoch as u64))?.loss)
    })
}

/// Plain reparameterized SGD on θ (no perturbation), the reference that
/// SA-BMA with `γ = 0` reduces to.
#[allow(clippy::too_many_arguments)]
pub fn train_vi_sgd(
    model: &Model,
    post: &mut GaussianPosterior,
    cfg: SabmaConfig,
    data: &Dataset,
    valid: Option<&Dataset>,
    sched: &LrSchedule,
    epochs: usize,
    patience: usize,
    seed: u64,
) -> Result<TrainingTrace> {
    let prior = (cfg.beta != 0.0).then(|| crate::posterior::DiagonalPrior::from_posterior(post));
    let mut state = [
        SgdState::new(post.mu.len()),
        SgdState::new(post.log_sigma.len()),
        SgdState::new(post.lowrank.len()),
    ];
    let flags = cfg.groups.flags();
    train_posterior(model, post, valid, epochs, patience, |post, epoch| {
        let lr = sched.at(epoch)?;
        let noise = post.draw_noise(derive_seed(seed, stream::STEP_NOISE, epoch as u64));
        let (loss, grad, _, _) = reparam_gradient(model, post, &noise, data, cfg.beta, prior.as_ref())?;
        let mut theta = post.theta();
        for (g, ((param, gr), st)) in theta.groups_mut().into_iter().zip(grad.groups()).zip(state.iter_mut()).enumerate() {
            if flags[g] {
                let wd = if g == 0 { cfg.weight_decay } else { 0.0 };
                sgd_step(param, gr, lr, cfg.momentum, wd, st);
            }
        }
        post.set_theta(theta);
        Ok(loss)
    })
}

fn train_posterior(
    model: &Model,
    post: &mut GaussianPosterior,
    valid: Option<&Dataset>,
    epochs: usize,
    patience: usize,
    mut step: impl FnMut(&mut GaussianPosterior, usize) -> Result<f64>,
) -> Result<TrainingTrace> {
    let mut trace = TrainingTrace::default();
    let mut stop = EarlyStop::new(if valid.is_some() { patience } else { 0 });
    for epoch in 0..epochs {
        let loss = step(post, epoch)?;
        let theta = post.theta();
        check_finite(&theta.mu)?;
        check_finite(&theta.log_sigma)?;
        check_finite(&theta.lowrank)?;
        trace.loss.push(loss);
        trace.epochs_run = epoch + 1;
        if let Some(v) = valid {
            let nll = model.data_loss(&post.mean_params().values, v)?;
            trace.val_nll.push(nll);
            if stop.observe(epoch, nll, &theta) {
                break;
            }
        }
    }
    if let Some((epoch, _, best)) = stop.best {
        post.set_theta(best);
        trace.best_epoch = Some(epoch);
    }
    Ok(trace)
}

/// SGD with SWAG snapshot collection over the second half of training.
fn collect_swag(
    model: &Model,
    w: &ParamVector,
    part: &ParamPartition,
    data: &Dataset,
    r: &ResolvedOptim,
    sched: &LrSchedule,
    epochs: usize,
) -> Result<(GaussianPosterior, TrainingTrace)> {
    let mut collector = SwagCollector::new(part.clone(), r.rank);
    let mut w = w.clone();
    let start = epochs / 2;
    let trace = train_point(model, &mut w, part, data, None, PointOptimizer::Sgd, r, sched, epochs, |epoch, w| {
        if epoch >= start {
            collector.collect(w)?;
        }
        Ok(())
    })?;
    Ok((swag_fit(&collector)?, trace))
}

/// What the mode pipeline hands to evaluation.
enum Trained {
    Point(ParamVector),
    Posterior(GaussianPosterior),
}

/// Run with wall-clock timing recorded.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_experiment_with(cfg, false)
}

/// Execute the configured pipeline. With `canonical` the report omits
/// wall-clock time and the output directory so that identical configs produce identical bytes. If
/// `cfg.out` is set, the report (partial on failure) and weights are written
/// there.
pub fn run_experiment_with(cfg: &ExperimentConfig, canonical: bool) -> Result<RunReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mut report = RunReport::empty(cfg, canonical);
    let result = run_stages(cfg, &mut report);
    if !canonical {
        report.wall_clock_secs = Some(started.elapsed().as_secs_f64());
    }
    match &result {
        Ok(()) => report.complete = true,
        Err(e) => report.error = Some(e.to_string()),
    }
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        report.save(&dir.join("report.json"))?;
    }
    result.map(|()| report)
}

fn run_stages(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let r = cfg.resolved();
    let seed = cfg.seed;
    let splits = load_splits(cfg)?;
    let model = build_model(cfg, &splits.train)?;
    report.total_params = model.num_params();

    let mut base = model.init_params(derive_seed(seed, stream::INIT, 0));
    if cfg.pretrain.epochs > 0 {
        let p = &cfg.pretrain;
        let pr = ResolvedOptim {
            lr: p.lr,
            momentum: p.momentum,
            weight_decay: p.weight_decay,
            ..r
        };
        let all = ParamPartition::all(model.num_params());
        let sched = LrSchedule::constant(p.lr, p.epochs);
        report.pretrain = Some(train_point(
            &model,
            &mut base,
            &all,
            &splits.source,
            None,
            PointOptimizer::Sgd,
            &pr,
            &sched,
            p.epochs,
            |_, _| Ok(()),
        )?);
    }
    if cfg.pretrain.reset_head {
        let fresh = model.init_params(derive_seed(seed, stream::INIT, 1));
        for e in model.layout().entries().iter().filter(|e| e.name.starts_with("head.")) {
            base.values[e.range()].copy_from_slice(&fresh.values[e.range()]);
        }
    }
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join("pretrained.json"), serde_json::to_string(&base)?.as_bytes())?;
    }

    let part = partition_params(&model, r.partition);
    report.p1 = part.num_trainable();
    let sched = schedule(r.schedule, r.lr, cfg.epochs);
    let valid = Some(&splits.valid);
    let sabma_cfg = SabmaConfig {
        perturbation: PerturbationConfig {
            gamma: r.gamma,
            fim_mode: r.fim_mode,
            eps: DEFAULT_EPS,
            eta_fisher: r.eta_fisher,
        },
        momentum: r.momentum,
        weight_decay: r.weight_decay,
        beta: r.beta,
        groups: r.groups,
    };
    let trained = match cfg.mode {
        Mode::Dnn | Mode::Sam | Mode::Fsam => {
            let opt = match cfg.mode {
                Mode::Dnn => PointOptimizer::Sgd,
                Mode::Sam => PointOptimizer::Sam,
                _ => PointOptimizer::Fsam,
            };
            let mut w = base.clone();
            report.training = Some(train_point(
                &model,
                &mut w,
                &part,
                &splits.train,
                valid,
                opt,
                &r,
                &sched,
                cfg.epochs,
                |_, _| Ok(()),
            )?);
            report.trainable_params = part.num_trainable();
            Trained::Point(w)
        }
        Mode::Swag => {
            let (post, trace) = collect_swag(&model, &base, &part, &splits.train, &r, &sched, cfg.epochs)?;
            report.training = Some(trace);
            report.trainable_params = post.num_variational();
            Trained::Posterior(post)
        }
        Mode::SabmaSwag | Mode::SabmaVi => {
            let mut post = if cfg.mode == Mode::SabmaSwag {
                let conv = LrSchedule::constant(r.lr, r.convert_epochs.max(1));
                let (post, trace) =
                    collect_swag(&model, &base, &part, &splits.train, &r, &conv, r.convert_epochs.max(1))?;
                report.conversion = Some(trace);
                post
            } else {
                moped_from_dnn(&base, &part, r.delta, r.alpha, r.rank)?
            };
            report.training = Some(train_sabma(
                &model,
                &mut post,
                sabma_cfg,
                &splits.train,
                valid,
                &sched,
                cfg.epochs,
                r.patience,
                seed,
            )?);
            report.trainable_params = post.num_variational();
            Trained::Posterior(post)
        }
    };
    if let Some(dir) = &cfg.out {
        match &trained {
            Trained::Point(w) => write_atomic(&dir.join("weights.json"), serde_json::to_string(w)?.as_bytes())?,
            Trained::Posterior(p) => save_posterior(p, &dir.join("posterior.json"))?,
        }
    }
    evaluate(cfg, &r, &model, &trained, &splits, report)
}

fn evaluate(
    cfg: &ExperimentConfig,
    r: &ResolvedOptim,
    model: &Model,
    trained: &Trained,
    splits: &Splits,
    report: &mut RunReport,
) -> Result<()> {
    let seed = cfg.seed;
    let samples: Vec<ParamVector> = match trained {
        Trained::Point(w) => vec![w.clone()],
        Trained::Posterior(p) => (0..r.samples)
            .map(|i| p.sample(derive_seed(seed, stream::BMA_SAMPLE, i as u64)))
            .collect(),
    };
    let m = samples.len();
    let test_probs = sample_probs(model, &samples, &splits.test.x)?;
    let all: Vec<_> = test_probs.iter().collect();
    report.final_metrics = Some(metrics(&average_probs(&all)?, &splits.test.y)?);
    let train_probs = sample_probs(model, &samples, &splits.train.x)?;
    report.train_metrics = Some(metrics(&average_probs(&train_probs.iter().collect::<Vec<_>>())?, &splits.train.y)?);

    let e = &cfg.eval;
    let opts = LanczosOptions {
        k: e.k,
        max_iters: e.lanczos_iters,
        tol: e.lanczos_tol,
        seed: derive_seed(seed, stream::LANCZOS, 0),
    };
    let n_spec = e.spectrum_samples.unwrap_or(m).min(m);
    if e.spectroscopy && n_spec > 0 {
        let flat = match trained {
            Trained::Point(w) => {
                PosteriorFlatness::from_reports(vec![hessian_spectrum(model, &w.values, &splits.train, &opts)?])
            }
            Trained::Posterior(p) => posterior_flatness(model, p, &splits.train, n_spec, &opts, seed)?,
        };
        if e.weyl {
            report.weyl = Some(sample_weyl_certificate(
                model,
                &samples[..n_spec],
                &flat.lambda1s,
                &splits.train,
                &opts,
            )?);
        }
        report.spectrum = Some(flat);
    }

    let lambda1s = report
        .spectrum
        .as_ref()
        .filter(|s| s.lambda1s.len() == m)
        .map(|s| s.lambda1s.clone());
    for &order in &e.orders {
        match order {
            BmaOrder::Flat | BmaOrder::Sharp => {
                if let Some(l) = &lambda1s {
                    report.bma.push(ordered_bma_from_probs(&test_probs, Some(l), order, None, &splits.test.y, 0)?);
                }
            }
            _ => {
                for rep in 0..e.random_repeats.max(1) {
                    let s = derive_seed(seed, stream::ORDER, rep as u64);
                    report.bma.push(ordered_bma_from_probs(
                        &test_probs,
                        lambda1s.as_deref(),
                        order,
                        None,
                        &splits.test.y,
                        s,
                    )?);
                }
            }
        }
    }

    for &severity in &e.severities {
        let x = corrupt(&splits.test.x, severity, derive_seed(seed, stream::CORRUPT, severity as u64))?;
        let probs = sample_probs(model, &samples, &x)?;
        let met = metrics(&average_probs(&probs.iter().collect::<Vec<_>>())?, &splits.test.y)?;
        report.shift.push(ShiftPoint {
            severity,
            acc: met.acc,
            ece: met.ece,
            nll: met.nll,
        });
    }
    Ok(())
}

/// Point weights from a `ParamVector` JSON file or, failing that, the mean
/// of a posterior checkpoint.
pub fn load_weights(path: &Path) -> Result<ParamVector> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(w) = serde_json::from_str::<ParamVector>(&text) {
        return ParamVector::new(w.registry, w.values);
    }
    Ok(crate::posterior::load_posterior(path)?.mean_params())
}
