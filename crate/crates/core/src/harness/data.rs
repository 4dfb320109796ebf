use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::DatasetKind;
use crate::autodiff::Matrix;
use crate::error::{CsvErrorKind, Error, Result};
use crate::io::write_atomic;
use crate::models::Dataset;
use crate::seeds::{derive_seed, stream};

/// Points per class in every generated test split.
pub const TEST_PER_CLASS: usize = 1000;

/// Generator parameters shared by the synthetic kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub kind: DatasetKind,
    pub noise: f64,
    /// Ignored by two_moons.
    pub classes: usize,
    /// Feature dimension of blobs.
    pub dim: usize,
    /// Distance between adjacent blob centres.
    pub separation: f64,
}

impl Generator {
    pub fn new(kind: DatasetKind, noise: f64) -> Self {
        Generator {
            kind,
            noise,
            classes: 2,
            dim: 2,
            separation: 10.0,
        }
    }

    pub fn classes(&self) -> usize {
        match self.kind {
            DatasetKind::TwoMoons => 2,
            _ => self.classes,
        }
    }

    /// `n_per_class` points of every class, grouped by class.
    pub fn sample(&self, n_per_class: usize, seed: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, self.noise.max(0.0)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let classes = self.classes();
        let dim = match self.kind {
            DatasetKind::Blobs => self.dim,
            DatasetKind::Csv => return Err(Error::Config("csv datasets are loaded, not generated".into())),
            _ => 2,
        };
        let mut x = Vec::with_capacity(classes * n_per_class * dim);
        let mut y = Vec::with_capacity(classes * n_per_class);
        for c in 0..classes {
            for _ in 0..n_per_class {
                let base: Vec<f64> = match self.kind {
                    DatasetKind::TwoMoons => {
                        let t = rng.random_range(0.0..PI);
                        if c == 0 {
                            vec![t.cos(), t.sin()]
                        } else {
                            vec![1.0 - t.cos(), 0.5 - t.sin()]
                        }
                    }
                    DatasetKind::Spirals => {
                        let t: f64 = rng.random_range(0.0..1.0);
                        let angle = 3.0 * PI * t + 2.0 * PI * c as f64 / classes as f64;
                        vec![t * angle.cos(), t * angle.sin()]
                    }
                    DatasetKind::Blobs => {
                        let radius = self.separation / (2.0 * (PI / classes as f64).sin());
                        let phi = 2.0 * PI * c as f64 / classes as f64;
                        let mut p = vec![0.0; dim];
                        p[0] = radius * phi.cos();
                        if dim > 1 {
                            p[1] = radius * phi.sin();
                        }
                        p
                    }
                    DatasetKind::Csv => unreachable!(),
                };
                x.extend(base.into_iter().map(|v| v + noise.sample(&mut rng)));
                y.push(c);
            }
        }
        Dataset::new(Matrix::new(classes * n_per_class, dim, x)?, y, classes)
    }
}

/// Train split with `n_per_class` points per class and a fixed
/// 1000-per-class test split drawn at a derived seed.
pub fn gen_dataset(generator: &Generator, n_per_class: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if n_per_class == 0 {
        return Err(Error::Config("n_per_class must be >= 1".into()));
    }
    let train = generator.sample(n_per_class, derive_seed(seed, stream::DATA_TRAIN, 0))?;
    let test = generator.sample(TEST_PER_CLASS, derive_seed(seed, stream::DATA_TEST, 0))?;
    Ok((train, test))
}

fn csv_err(line: usize, kind: CsvErrorKind) -> Error {
    Error::Csv { line, kind }
}

/// Parse `f0,...,fd,label` rows. Labels must be the contiguous range `0..C`.
pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(csv_err(1, CsvErrorKind::Empty)),
        Some(r) => r.map_err(|e| csv_err(1, CsvErrorKind::BadHeader(e.to_string())))?,
    };
    let width = header.len();
    let header_ok = width >= 2
        && header.get(width - 1) == Some("label")
        && (0..width - 1).all(|i| header.get(i) == Some(format!("f{i}").as_str()));
    if !header_ok {
        return Err(csv_err(1, CsvErrorKind::BadHeader(header.iter().collect::<Vec<_>>().join(","))));
    }
    let d = width - 1;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut lines = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            csv_err(line, CsvErrorKind::NonNumeric(e.to_string()))
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(csv_err(
                line,
                CsvErrorKind::Ragged {
                    expected: width,
                    found: rec.len(),
                },
            ));
        }
        for cell in rec.iter().take(d) {
            let v: f64 = cell.parse().map_err(|_| csv_err(line, CsvErrorKind::NonNumeric(cell.to_string())))?;
            if !v.is_finite() {
                return Err(csv_err(line, CsvErrorKind::NonNumeric(cell.to_string())));
            }
            x.push(v);
        }
        let cell = &rec[d];
        let label: usize = cell.parse().map_err(|_| csv_err(line, CsvErrorKind::BadLabel(cell.to_string())))?;
        y.push(label);
        lines.push(line);
    }
    if y.is_empty() {
        return Err(csv_err(2, CsvErrorKind::Empty));
    }
    let classes = y.iter().max().unwrap() + 1;
    let mut seen = vec![false; classes];
    y.iter().for_each(|&l| seen[l] = true);
    if let Some(missing) = seen.iter().position(|s| !s) {
        let at = y.iter().position(|&l| l > missing).map_or(0, |i| lines[i]);
        return Err(csv_err(at, CsvErrorKind::LabelGap { missing }));
    }
    if classes < 2 {
        return Err(csv_err(lines[0], CsvErrorKind::LabelGap { missing: 1 }));
    }
    Dataset::new(Matrix::new(y.len(), d, x)?, y, classes)
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

pub fn dataset_csv(data: &Dataset) -> String {
    let d = data.x.cols();
    let mut s: String = (0..d).map(|i| format!("f{i},")).collect();
    s.push_str("label\n");
    for (r, y) in data.y.iter().enumerate() {
        for v in data.x.row(r) {
            s.push_str(&format!("{v:.16e},"));
        }
        s.push_str(&format!("{y}\n"));
    }
    s
}

pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, dataset_csv(data).as_bytes())
}

/// Per-feature standard deviation (population form).
pub fn feature_std(x: &Matrix) -> Vec<f64> {
    let n = x.rows().max(1) as f64;
    (0..x.cols())
        .map(|c| {
            let mean = (0..x.rows()).map(|r| x.get(r, c)).sum::<f64>() / n;
            ((0..x.rows()).map(|r| (x.get(r, c) - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

/// Additive Gaussian corruption with per-feature scale `0.1 · severity · std`.
pub fn corrupt(x: &Matrix, severity: u8, seed: u64) -> Result<Matrix> {
    if !(1..=5).contains(&severity) {
        return Err(Error::InvalidArgument(format!("severity {severity} outside 1..=5")));
    }
    let std = feature_std(x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = x.clone();
    for r in 0..out.rows() {
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
            *v += 0.1 * severity as f64 * std[c] * z;
        }
    }
    Ok(out)
}
