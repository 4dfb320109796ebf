use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sabma::harness::{
    build_model, compare_runs, gen_dataset, load_splits, load_weights, run_experiment_with, write_csv, DatasetKind,
    ExperimentConfig, Generator, RunReport,
};
use sabma::losssurface::{export_grid, grid_eval, plane_from_points};
use sabma::{Error, Result};

macro_rules! say {
    ($($t:tt)*) => {
        emit(&format!("{}\n", format_args!($($t)*)))
    };
}

/// Write to stdout; a closed pipe ends the process quietly.
fn emit(text: &str) {
    if let Err(e) = std::io::stdout().lock().write_all(text.as_bytes()) {
        if e.kind() == ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
    }
}

#[derive(Parser)]
#[command(name = "sabma", version, about = "Flat-posterior Bayesian model averaging experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write its report.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Omit wall-clock time so reruns are byte-identical.
        #[arg(long)]
        canonical: bool,
    },
    /// Print the Hessian spectra and Weyl certificate stored in a report.
    Spectrum {
        #[arg(long)]
        report: PathBuf,
    },
    /// Evaluate the training loss on the plane through three weight files.
    Surface {
        #[arg(long)]
        w0: PathBuf,
        #[arg(long)]
        w1: PathBuf,
        #[arg(long)]
        w2: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 21)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate metrics across reports, grouped by config hash.
    Compare {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Also write the comparison as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write train.csv and test.csv for a synthetic dataset.
    GenData {
        #[arg(long, value_parser = parse_kind)]
        kind: DatasetKind,
        #[arg(long)]
        n_per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_kind(s: &str) -> std::result::Result<DatasetKind, String> {
    match s {
        "two_moons" => Ok(DatasetKind::TwoMoons),
        "spirals" => Ok(DatasetKind::Spirals),
        "blobs" => Ok(DatasetKind::Blobs),
        other => Err(format!("unknown dataset kind `{other}` (two_moons, spirals, blobs)")),
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Train {
            config,
            seed,
            out,
            canonical,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.out = out;
            }
            let r = run_experiment_with(&cfg, canonical)?;
            if let Some(m) = r.final_metrics {
                say!("acc {:.2}  ece {:.4}  nll {:.4}", m.acc, m.ece, m.nll);
            }
            if let Some(s) = &r.spectrum {
                say!("mean lambda1 {:.6}", s.mean_lambda1);
            }
            say!("trainable parameters {}", r.trainable_params);
            if let Some(dir) = &cfg.out {
                say!("report written to {}", dir.join("report.json").display());
            }
        }
        Cmd::Spectrum { report } => {
            let r = RunReport::load(&report)?;
            let s = r
                .spectrum
                .ok_or_else(|| Error::Config(format!("{} has no spectrum section", report.display())))?;
            for (i, rep) in s.reports.iter().enumerate() {
                let eig: Vec<String> = rep.eigenvalues.iter().map(|v| format!("{v:.6}")).collect();
                let ratio = rep.ratio_1_5.map_or_else(|| "-".into(), |v| format!("{v:.4}"));
                say!(
                    "sample {i:>3}: [{}] l1/l5 {ratio} iters {} converged {}",
                    eig.join(", "),
                    rep.iterations,
                    rep.converged
                );
            }
            let ratio = s.mean_ratio_1_5.map_or_else(|| "-".into(), |v| format!("{v:.4}"));
            say!("mean lambda1 {:.6}, mean l1/l5 {ratio}", s.mean_lambda1);
            if let Some(w) = r.weyl {
                say!(
                    "weyl: {:.6} <= {:.6} <= {:.6} ({})",
                    w.lower,
                    w.observed_lambda_max,
                    w.upper,
                    if w.pass { "pass" } else { "FAIL" }
                );
            }
        }
        Cmd::Surface {
            w0,
            w1,
            w2,
            config,
            resolution,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let splits = load_splits(&cfg)?;
            let model = build_model(&cfg, &splits.train)?;
            let (a, b, c) = (load_weights(&w0)?, load_weights(&w1)?, load_weights(&w2)?);
            if a.len() != model.num_params() {
                return Err(Error::Config(format!(
                    "{} holds {} parameters, the configured model has {}",
                    w0.display(),
                    a.len(),
                    model.num_params()
                )));
            }
            let plane = plane_from_points(&a, &b.values, &c.values)?;
            let extent = plane.default_extent();
            let grid = grid_eval(&model, &plane, extent, (resolution, resolution), &splits.train)?;
            let dir = out.or(cfg.out).unwrap_or_else(|| PathBuf::from("."));
            mkdir(&dir)?;
            export_grid(&plane, extent, &grid, &dir, "surface")?;
            let (lo, hi) = grid
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            say!("loss range [{lo:.6}, {hi:.6}] over {resolution}x{resolution}; wrote {}", dir.join("surface.csv").display());
        }
        Cmd::Compare { paths, json } => {
            let c = compare_runs(&paths)?;
            emit(&c.to_text());
            if let Some(p) = json {
                let text = serde_json::to_string_pretty(&c)?;
                std::fs::write(&p, text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            }
        }
        Cmd::GenData {
            kind,
            n_per_class,
            seed,
            noise,
            out,
        } => {
            let g = Generator::new(kind, noise);
            let (train, test) = gen_dataset(&g, n_per_class, seed)?;
            mkdir(&out)?;
            write_csv(&train, &out.join("train.csv"))?;
            write_csv(&test, &out.join("test.csv"))?;
            say!("wrote {} train and {} test rows to {}", train.len(), test.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
