use std::process::Command;

use sabma::harness::{
    build_model, load_splits, run_experiment_with, train_sabma, train_vi_sgd, DatasetKind, ExperimentConfig, Mode, RunReport,
};
use sabma::models::{partition_params, PartitionPolicy};
use sabma::optimizers::{FimMode, LrSchedule, PerturbationConfig, SabmaConfig};
use sabma::posterior::moped_from_dnn;

fn quick(mode: Mode, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(mode);
    cfg.seed = seed;
    cfg.epochs = 40;
    cfg.pretrain.epochs = 60;
    cfg.eval.spectroscopy = false;
    cfg.eval.weyl = false;
    cfg.eval.severities.clear();
    cfg
}

#[test]
fn zero_radius_identity_is_plain_vi() {
    let cfg = quick(Mode::SabmaVi, 3);
    let splits = load_splits(&cfg).unwrap();
    let model = build_model(&cfg, &splits.train).unwrap();
    let part = partition_params(&model, PartitionPolicy::NormHead);
    let start = moped_from_dnn(&model.init_params(1), &part, 0.05, 1e-2, 3).unwrap();
    let mut sc = SabmaConfig::new(PerturbationConfig::new(0.0, FimMode::Identity));
    sc.weight_decay = 5e-4;
    let sched = LrSchedule::constant(0.05, 30);

    let mut a = start.clone();
    let ta = train_sabma(&model, &mut a, sc, &splits.train, Some(&splits.valid), &sched, 30, 30, 9).unwrap();
    let mut b = start;
    let tb = train_vi_sgd(&model, &mut b, sc, &splits.train, Some(&splits.valid), &sched, 30, 30, 9).unwrap();
    assert_eq!(ta.loss, tb.loss);
    assert_eq!(a.theta(), b.theta());
}

#[test]
fn sabma_trainable_count() {
    for mode in [Mode::SabmaVi, Mode::SabmaSwag] {
        let rep = run_experiment_with(&quick(mode, 1), true).unwrap();
        assert!(rep.complete);
        assert_eq!(rep.trainable_params, (5 + 2) * rep.p1, "{mode:?}");
        assert!(rep.p1 < rep.total_params);
    }
}

#[test]
fn dnn_separates_blobs() {
    for seed in 0..5 {
        let mut cfg = ExperimentConfig::new(Mode::Dnn);
        cfg.seed = seed;
        cfg.dataset.kind = DatasetKind::Blobs;
        cfg.eval.spectroscopy = false;
        cfg.eval.weyl = false;
        cfg.eval.severities.clear();
        let rep = run_experiment_with(&cfg, true).unwrap();
        let acc = rep.final_metrics.unwrap().acc;
        assert!(acc >= 99.0, "seed {seed}: {acc}");
    }
}

#[test]
fn every_mode_completes() {
    for mode in [Mode::Dnn, Mode::Sam, Mode::Fsam, Mode::Swag, Mode::SabmaSwag, Mode::SabmaVi] {
        let rep = run_experiment_with(&quick(mode, 2), true).unwrap();
        assert!(rep.complete, "{mode:?}");
        assert!(rep.final_metrics.unwrap().acc > 80.0, "{mode:?}");
    }
}

fn sabma_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sabma"))
}

#[test]
fn cli_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("c.json");
    let mut cfg = quick(Mode::SabmaVi, 4);
    cfg.eval.spectroscopy = true;
    cfg.eval.spectrum_samples = Some(3);
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();

    let out = dir.path().join("run");
    let st = sabma_bin().args(["train", "--config"]).arg(&cfg_path).args(["--seed", "4", "--canonical", "--out"]).arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    let report = out.join("report.json");
    let rep = RunReport::load(&report).unwrap();
    assert!(rep.complete && rep.spectrum.is_some());

    let spec = sabma_bin().arg("spectrum").arg("--report").arg(&report).output().unwrap();
    assert_eq!(spec.status.code(), Some(0));
    assert!(!spec.stdout.is_empty());

    let cmp = sabma_bin().arg("compare").arg(&report).arg(&report).output().unwrap();
    assert_eq!(cmp.status.code(), Some(0));

    // a second model of the same shape for the third plane point
    let dnn_cfg = dir.path().join("dnn.json");
    std::fs::write(&dnn_cfg, serde_json::to_string(&quick(Mode::Dnn, 4)).unwrap()).unwrap();
    let dnn_out = dir.path().join("dnn");
    let st = sabma_bin().args(["train", "--config"]).arg(&dnn_cfg).arg("--out").arg(&dnn_out).output().unwrap();
    assert_eq!(st.status.code(), Some(0));

    let surface = |w2: &std::path::Path, dest: &std::path::Path| {
        sabma_bin()
            .arg("surface")
            .arg("--w0")
            .arg(out.join("pretrained.json"))
            .arg("--w1")
            .arg(out.join("posterior.json"))
            .arg("--w2")
            .arg(w2)
            .arg("--config")
            .arg(&cfg_path)
            .args(["--resolution", "5", "--out"])
            .arg(dest)
            .output()
            .unwrap()
    };
    let surf_dir = dir.path().join("surface");
    assert_eq!(surface(&dnn_out.join("weights.json"), &surf_dir).status.code(), Some(0));
    let csv = std::fs::read_to_string(surf_dir.join("surface.csv")).unwrap();
    assert_eq!(csv.lines().count(), 26);
    assert!(csv.lines().skip(1).all(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap().is_finite()));
    // w0 and w2 coincide: the plane is degenerate
    assert_eq!(surface(&out.join("pretrained.json"), &surf_dir).status.code(), Some(3));

    let data_dir = dir.path().join("data");
    let st = sabma_bin()
        .args(["gen-data", "--kind", "spirals", "--n-per-class", "5", "--seed", "1", "--out"])
        .arg(&data_dir)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
    let train = std::fs::read_to_string(data_dir.join("train.csv")).unwrap();
    assert_eq!(train.lines().count(), 11);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"mode":"dnn","learning_rate":0.1}"#).unwrap();
    let st = sabma_bin().arg("train").arg("--config").arg(&bad).output().unwrap();
    assert_eq!(st.status.code(), Some(2));

    let missing = sabma_bin().args(["train", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let blowup = dir.path().join("blowup.json");
    std::fs::write(
        &blowup,
        r#"{"mode":"dnn","optim":{"lr":1e300},"epochs":5,"eval":{"spectroscopy":false,"weyl":false,"severities":[]}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let st = sabma_bin().arg("train").arg("--config").arg(&blowup).arg("--out").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(3));
    let partial = RunReport::load(&out.join("report.json")).unwrap();
    assert!(!partial.complete && partial.error.is_some());
}
