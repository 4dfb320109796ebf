//! Configuration, datasets, experiment pipelines and run reports.

mod compare;
mod config;
mod data;
mod run;

pub use compare::{compare_reports, compare_runs, CompareRow, Comparison, GroupSummary, MeanStd};
pub use config::{
    DatasetKind, DatasetSpec, EvalSpec, ExperimentConfig, Mode, ModelSpec, OptimSpec, PretrainSpec, ResolvedOptim,
};
pub use data::{
    corrupt, dataset_csv, feature_std, gen_dataset, load_csv, parse_csv, write_csv, Generator, TEST_PER_CLASS,
};
pub use run::{
    build_model, load_splits, load_weights, run_experiment, run_experiment_with, train_point, train_sabma, train_vi_sgd,
    PointOptimizer, RunReport, ShiftPoint, Splits, TrainingTrace, SCHEMA_VERSION,
};
