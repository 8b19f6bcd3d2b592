//! Tabular regression data: CSV ingestion, seeded splits, target summaries
//! and the Friedman-style synthetic generator used by the Monte Carlo study.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature matrix (row-major) with its target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    target: Vec<f64>,
    feature_names: Vec<String>,
    target_name: String,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        target: Vec<f64>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        let n = target.len();
        if n == 0 {
            return Err(Error::InvalidDataset("no rows".into()));
        }
        if n_features == 0 {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if features.len() != n * n_features {
            return Err(Error::InvalidDataset(format!(
                "feature buffer has {} values, expected {} x {}",
                features.len(),
                n,
                n_features
            )));
        }
        if feature_names.len() != n_features {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} features",
                feature_names.len(),
                n_features
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature at row {}, column {}",
                pos / n_features,
                pos % n_features
            )));
        }
        if let Some(pos) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite target at row {pos}")));
        }
        Ok(Dataset {
            features,
            n_features,
            target,
            feature_names,
            target_name: target_name.into(),
        })
    }

    /// Builds a dataset with generated names `X1..Xd` and target `Y`.
    pub fn from_rows(rows: &[Vec<f64>], target: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.len() != target.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} targets",
                rows.len(),
                target.len()
            )));
        }
        let mut flat = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::RaggedRow {
                    row: i,
                    found: row.len(),
                    expected: d,
                });
            }
            flat.extend_from_slice(row);
        }
        Dataset::new(flat, d, target, default_names(d), "Y")
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.n_features + feature]
    }

    pub fn column(&self, feature: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[feature])
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut target = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            target.push(self.target[i]);
        }
        Dataset {
            features,
            n_features: self.n_features,
            target,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }

    /// Removes the named feature columns.
    pub fn drop_columns(&self, names: &[&str]) -> Result<Dataset> {
        for name in names {
            if self.feature_index(name).is_none() {
                return Err(Error::MissingColumn((*name).to_string()));
            }
        }
        let keep: Vec<usize> = (0..self.n_features)
            .filter(|&j| !names.contains(&self.feature_names[j].as_str()))
            .collect();
        let mut features = Vec::with_capacity(self.n_rows() * keep.len());
        for row in self.rows() {
            features.extend(keep.iter().map(|&j| row[j]));
        }
        let names = keep.iter().map(|&j| self.feature_names[j].clone()).collect();
        Dataset::new(features, keep.len(), self.target.clone(), names, self.target_name.clone())
    }

    /// Writes the dataset as CSV (features, then target, then any extra columns).
    pub fn write_csv(&self, path: impl AsRef<Path>, extra: &[(&str, &[f64])]) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(&self.target_name);
        header.extend(extra.iter().map(|(name, _)| *name));
        w.write_record(&header)?;
        for (i, row) in self.rows().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(self.target[i].to_string());
            rec.extend(extra.iter().map(|(_, col)| col[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("X{j}")).collect()
}

/// Features parsed from a CSV file, with or without a target column.
#[derive(Debug, Clone)]
pub(crate) struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub(crate) fn read_numeric_csv(path: &Path) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let mut seen = HashSet::new();
    for name in &header {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateColumn(name.clone()));
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        // Data rows are numbered from 1, matching the line after the header.
        let row_no = i + 1;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row: row_no,
                found: record.len(),
                expected: header.len(),
            });
        }
        let mut values = Vec::with_capacity(header.len());
        for (j, cell) in record.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::NonNumeric {
                        row: row_no,
                        column: header[j].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(RawTable { header, rows })
}

/// Loads a CSV with a header row; `target_column` becomes the target and
/// every other column a feature. Row order is preserved.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset> {
    let table = read_numeric_csv(path.as_ref())?;
    let t = table
        .header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingColumn(target_column.to_string()))?;
    let names: Vec<String> = table
        .header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != t)
        .map(|(_, h)| h.clone())
        .collect();
    let d = names.len();
    let mut features = Vec::with_capacity(table.rows.len() * d);
    let mut target = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        target.push(row[t]);
        features.extend(row.iter().enumerate().filter(|&(j, _)| j != t).map(|(_, v)| *v));
    }
    Dataset::new(features, d, target, names, target_column)
}

/// Feature columns of a CSV that may or may not carry the target column.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub target: Option<Vec<f64>>,
}

impl FeatureTable {
    /// Dataset view; when the target column was absent the target is all zeros.
    pub fn to_dataset(&self, target_name: &str) -> Result<Dataset> {
        let d = self.names.len();
        let flat: Vec<f64> = self.rows.iter().flatten().copied().collect();
        let target = self.target.clone().unwrap_or_else(|| vec![0.0; self.rows.len()]);
        Dataset::new(flat, d, target, self.names.clone(), target_name)
    }
}

/// Reads feature columns, dropping `target_column` when present.
pub fn load_feature_csv(path: impl AsRef<Path>, target_column: &str) -> Result<FeatureTable> {
    let table = read_numeric_csv(path.as_ref())?;
    let t = table.header.iter().position(|h| h == target_column);
    let keep = |j: usize| Some(j) != t;
    let names = table
        .header
        .iter()
        .enumerate()
        .filter(|&(j, _)| keep(j))
        .map(|(_, h)| h.clone())
        .collect();
    let rows = table
        .rows
        .iter()
        .map(|r| r.iter().enumerate().filter(|&(j, _)| keep(j)).map(|(_, v)| *v).collect())
        .collect();
    let target = t.map(|t| table.rows.iter().map(|r| r[t]).collect());
    Ok(FeatureTable { names, rows, target })
}

/// Seeded random split; the train side gets `floor(n * train_fraction)` rows.
/// Both sides keep the original relative row order.
pub fn train_test_split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = ds.n_rows();
    let degenerate = Error::DegenerateSplit {
        fraction: train_fraction,
        n,
    };
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(degenerate);
    }
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train < 1 || n - n_train < 1 {
        return Err(degenerate);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = idx.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.select_rows(train), ds.select_rows(test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub mean: f64,
    pub std: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

impl TargetStats {
    /// Plug-in (divide-by-n) summaries of a non-empty slice.
    pub fn of(values: &[f64]) -> TargetStats {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Rounding can push the mean a hair outside [min, max] for constant input.
        TargetStats {
            mean: mean.clamp(min, max),
            std: variance.sqrt(),
            variance,
            min,
            max,
        }
    }
}

pub fn target_stats(ds: &Dataset) -> TargetStats {
    TargetStats::of(ds.target())
}

/// Regression function of the synthetic benchmark. Only the first eight
/// coordinates matter.
pub fn friedman_g_star(x: &[f64]) -> f64 {
    let bump: f64 = x[..3].iter().map(|&v| (-3.0 * (1.0 - v) * (1.0 - v)).exp()).product();
    9.0 * bump - 0.8 * (-2.0 * (x[3] - x[4])).exp() + 2.0 * (PI * x[5]).sin().powi(2)
        - 2.5 * (x[6] - x[7])
}

/// Ratio of the standard deviation of g* to the noise standard deviation.
pub const SIGNAL_TO_NOISE: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub data: Dataset,
    /// Noise-free regression values at each row.
    pub truth: Vec<f64>,
    pub noise_sd: f64,
}

impl SyntheticSample {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.data.write_csv(path, &[("g_star", &self.truth)])
    }
}

fn synthetic_features(n: usize, d: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let mut features = Vec::with_capacity(n * d);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        let start = features.len();
        features.extend((0..d).map(|_| f64::from(rng.random_range(0u8..10)) / 10.0));
        truth.push(friedman_g_star(&features[start..]));
    }
    (features, truth)
}

/// Draws `n` rows with features uniform on {0, 0.1, ..., 0.9}; the noise
/// level is set so that the sample variance of `g*` is twice the noise variance.
pub fn friedman_synthetic(n: usize, d: usize, seed: u64) -> Result<SyntheticSample> {
    if d < 8 {
        return Err(Error::TooFewFeatures(d));
    }
    if n == 0 {
        return Err(Error::InvalidDataset("no rows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (features, truth) = synthetic_features(n, d, &mut rng);
    let noise_sd = TargetStats::of(&truth).std / SIGNAL_TO_NOISE;
    finish_synthetic(features, d, truth, noise_sd, &mut rng)
}

/// Same design as [`friedman_synthetic`] with a fixed noise level, used for
/// test samples that must share the training noise.
pub fn friedman_synthetic_with_noise(
    n: usize,
    d: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<SyntheticSample> {
    if d < 8 {
        return Err(Error::TooFewFeatures(d));
    }
    if n == 0 {
        return Err(Error::InvalidDataset("no rows".into()));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise_sd {noise_sd}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (features, truth) = synthetic_features(n, d, &mut rng);
    finish_synthetic(features, d, truth, noise_sd, &mut rng)
}

fn finish_synthetic(
    features: Vec<f64>,
    d: usize,
    truth: Vec<f64>,
    noise_sd: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SyntheticSample> {
    let target: Vec<f64> = if noise_sd > 0.0 {
        let normal = Normal::new(0.0, noise_sd).expect("finite positive sd");
        truth.iter().map(|g| g + normal.sample(rng)).collect()
    } else {
        truth.clone()
    };
    let data = Dataset::new(features, d, target, default_names(d), "Y")?;
    Ok(SyntheticSample {
        data,
        truth,
        noise_sd,
    })
}
