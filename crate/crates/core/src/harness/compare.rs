use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Mode;
use super::run::RunReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(MeanStd { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub path: String,
    pub config_hash: String,
    pub mode: Mode,
    pub seed: u64,
    pub acc: f64,
    pub ece: f64,
    pub nll: f64,
    pub lambda1: Option<f64>,
    pub ratio_1_5: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub config_hash: String,
    pub mode: Mode,
    pub runs: usize,
    pub acc: MeanStd,
    pub ece: MeanStd,
    pub nll: MeanStd,
    pub lambda1: Option<MeanStd>,
    pub ratio_1_5: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub groups: Vec<GroupSummary>,
}

pub fn compare_runs(paths: &[impl AsRef<Path>]) -> Result<Comparison> {
    let reports = paths
        .iter()
        .map(|p| Ok((p.as_ref().display().to_string(), RunReport::load(p.as_ref())?)))
        .collect::<Result<Vec<_>>>()?;
    compare_reports(&reports)
}

/// Rows in input order; groups by config hash in first-seen order.
pub fn compare_reports(reports: &[(String, RunReport)]) -> Result<Comparison> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("compare needs at least one report".into()));
    }
    let mut rows = Vec::new();
    for (path, r) in reports {
        let m = r
            .final_metrics
            .ok_or_else(|| Error::InvalidArgument(format!("{path}: report has no final metrics")))?;
        rows.push(CompareRow {
            path: path.clone(),
            config_hash: r.config_hash.clone(),
            mode: r.mode,
            seed: r.config.seed,
            acc: m.acc,
            ece: m.ece,
            nll: m.nll,
            lambda1: r.spectrum.as_ref().map(|s| s.mean_lambda1),
            ratio_1_5: r.spectrum.as_ref().and_then(|s| s.mean_ratio_1_5),
        });
    }
    let mut order: Vec<&str> = Vec::new();
    let mut by_hash: BTreeMap<&str, Vec<&CompareRow>> = BTreeMap::new();
    for row in &rows {
        if !by_hash.contains_key(row.config_hash.as_str()) {
            order.push(&row.config_hash);
        }
        by_hash.entry(&row.config_hash).or_default().push(row);
    }
    let groups = order
        .iter()
        .map(|h| {
            let g = &by_hash[h];
            let col = |f: &dyn Fn(&CompareRow) -> f64| MeanStd::of(&g.iter().map(|r| f(r)).collect::<Vec<_>>()).unwrap();
            let opt = |f: &dyn Fn(&CompareRow) -> Option<f64>| {
                let v: Vec<f64> = g.iter().filter_map(|r| f(r)).collect();
                MeanStd::of(&v)
            };
            GroupSummary {
                config_hash: h.to_string(),
                mode: g[0].mode,
                runs: g.len(),
                acc: col(&|r| r.acc),
                ece: col(&|r| r.ece),
                nll: col(&|r| r.nll),
                lambda1: opt(&|r| r.lambda1),
                ratio_1_5: opt(&|r| r.ratio_1_5),
            }
        })
        .collect();
    Ok(Comparison { rows, groups })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn fmt_ms(v: Option<MeanStd>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.4} ± {:.4}", v.mean, v.std))
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<40} {:<11} {:>6} {:>8} {:>8} {:>8} {:>12} {:>10}",
            "run", "mode", "seed", "acc", "ece", "nll", "lambda1", "l1/l5"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<40} {:<11} {:>6} {:>8.2} {:>8.4} {:>8.4} {:>12} {:>10}",
                r.path,
                format!("{:?}", r.mode),
                r.seed,
                r.acc,
                r.ece,
                r.nll,
                fmt_opt(r.lambda1),
                fmt_opt(r.ratio_1_5)
            );
        }
        s.push('\n');
        for g in &self.groups {
            let _ = writeln!(
                s,
                "{} {:?} (n={}): acc {:.2} ± {:.2}, ece {:.4} ± {:.4}, nll {:.4} ± {:.4}, lambda1 {}, l1/l5 {}",
                &g.config_hash[..12.min(g.config_hash.len())],
                g.mode,
                g.runs,
                g.acc.mean,
                g.acc.std,
                g.ece.mean,
                g.ece.std,
                g.nll.mean,
                g.nll.std,
                fmt_ms(g.lambda1),
                fmt_ms(g.ratio_1_5)
            );
        }
        s
    }
}
