//! Loss on the plane through three weight vectors (pretrained, SGD and
//! SAM solutions), written as surface.csv and surface.json.
//!
//! cargo run --release --example loss_surface -- [out_dir]

use std::path::PathBuf;

use sabma::harness::{build_model, load_splits, train_point, ExperimentConfig, Mode, PointOptimizer};
use sabma::losssurface::{export_grid, grid_eval, plane_from_points};
use sabma::models::ParamPartition;
use sabma::optimizers::LrSchedule;

fn main() -> sabma::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("sabma-surface"));
    let cfg = ExperimentConfig::new(Mode::Sam);
    let splits = load_splits(&cfg)?;
    let model = build_model(&cfg, &splits.train)?;
    let part = ParamPartition::all(model.num_params());
    let sched = LrSchedule::constant(0.05, 200);

    let w0 = model.init_params(0);
    let mut solutions = Vec::new();
    for (mode, opt) in [(Mode::Dnn, PointOptimizer::Sgd), (Mode::Sam, PointOptimizer::Sam)] {
        let mut w = w0.clone();
        let r = ExperimentConfig::new(mode).resolved();
        train_point(&model, &mut w, &part, &splits.train, None, opt, &r, &sched, 200, |_, _| Ok(()))?;
        solutions.push(w);
    }
    let plane = plane_from_points(&w0, &solutions[0].values, &solutions[1].values)?;
    let extent = plane.default_extent();
    let grid = grid_eval(&model, &plane, extent, (21, 21), &splits.train)?;
    export_grid(&plane, extent, &grid, &out, "surface")?;
    for (name, (a, b)) in ["init", "sgd", "sam"].iter().zip(plane.points) {
        println!("{name:>4} at ({a:.3}, {b:.3})");
    }
    let lo = grid.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("21×21 grid, loss in [{lo:.4}, {hi:.4}], written to {}", out.display());
    Ok(())
}
