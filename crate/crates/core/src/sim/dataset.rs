use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Genuine,
    Poison,
}

/// Binary class label, `+1` or `−1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    Pos,
    Neg,
}

impl Class {
    pub const BOTH: [Class; 2] = [Class::Pos, Class::Neg];

    pub fn sign(self) -> f64 {
        match self {
            Class::Pos => 1.0,
            Class::Neg => -1.0,
        }
    }

    pub fn opposite(self) -> Class {
        match self {
            Class::Pos => Class::Neg,
            Class::Neg => Class::Pos,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Pos => "+1",
            Class::Neg => "-1",
        }
    }
}

/// Row-major feature matrix with per-row label and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<Class>,
    origin: Vec<Origin>,
}

impl LabeledDataset {
    pub fn new(
        dim: usize,
        features: Vec<f64>,
        labels: Vec<Class>,
        origin: Vec<Origin>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dataset needs at least one feature column"));
        }
        if features.len() != dim * labels.len() || labels.len() != origin.len() {
            return Err(Error::invalid(format!(
                "dataset shape mismatch: {} values, {} labels, {} origin flags for dimension {dim}",
                features.len(),
                labels.len(),
                origin.len()
            )));
        }
        if let Some(k) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature at row {}, column {}",
                k / dim,
                k % dim
            )));
        }
        Ok(Self {
            dim,
            features,
            labels,
            origin,
        })
    }

    /// All-genuine dataset.
    pub fn genuine(dim: usize, features: Vec<f64>, labels: Vec<Class>) -> Result<Self> {
        let n = labels.len();
        Self::new(dim, features, labels, vec![Origin::Genuine; n])
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            features: Vec::new(),
            labels: Vec::new(),
            origin: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn origin(&self) -> &[Origin] {
        &self.origin
    }

    pub fn count(&self, class: Class, origin: Option<Origin>) -> usize {
        self.labels
            .iter()
            .zip(&self.origin)
            .filter(|&(&c, &o)| c == class && origin.map_or(true, |want| want == o))
            .count()
    }

    pub fn push(&mut self, row: &[f64], label: Class, origin: Origin) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::invalid(format!(
                "row has {} features, dataset has {}",
                row.len(),
                self.dim
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("row contains a non-finite feature"));
        }
        self.features.extend_from_slice(row);
        self.labels.push(label);
        self.origin.push(origin);
        Ok(())
    }

    /// Rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut features = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            features,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            origin: idx.iter().map(|&i| self.origin[i]).collect(),
        }
    }

    /// `self` followed by the rows of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::invalid(
                "cannot concatenate datasets of different dimension",
            ));
        }
        let mut out = self.clone();
        out.features.extend_from_slice(&other.features);
        out.labels.extend_from_slice(&other.labels);
        out.origin.extend_from_slice(&other.origin);
        Ok(out)
    }
}

/// Reads a headerless numeric CSV whose last column is a `0`/`1` label.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), path)
}

pub fn read_csv<R: std::io::Read>(reader: R, origin: &Path) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse = |line: u64, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match width {
            None if rec.len() < 2 => {
                return Err(parse(line, "need at least one feature and a label".into()))
            }
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(parse(
                    line,
                    format!("expected {w} columns, found {}", rec.len()),
                ))
            }
            Some(_) => {}
        }
        let last = rec.len() - 1;
        for (col, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse(
                    line,
                    format!("column {}: `{cell}` is not a number", col + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(parse(
                    line,
                    format!("column {}: value is not finite", col + 1),
                ));
            }
            if col < last {
                features.push(v);
            } else if v == 1.0 {
                labels.push(Class::Pos);
            } else if v == 0.0 {
                labels.push(Class::Neg);
            } else {
                return Err(parse(line, format!("label `{cell}` is neither 0 nor 1")));
            }
        }
    }
    if labels.len() < 2 {
        return Err(parse(
            0,
            format!("need at least two rows, found {}", labels.len()),
        ));
    }
    LabeledDataset::genuine(width.unwrap() - 1, features, labels)
}

/// Per-column z-score statistics fitted on the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Population standard deviation, or 1 for constant columns.
    pub scale: Vec<f64>,
}

impl NormStats {
    pub fn fit(data: &LabeledDataset) -> Self {
        let d = data.dim();
        let n = data.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in data.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in data.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, data: &LabeledDataset) -> LabeledDataset {
        let mut out = data.clone();
        for row in out.features.chunks_exact_mut(self.dim()) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Number of training rows for a split, rounded down.
pub fn train_size(n: usize, train_fraction: f64) -> usize {
    (train_fraction * n as f64).floor() as usize
}

/// Seeded shuffle, split, and z-scoring with training statistics.
pub fn normalize_and_split(
    data: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset, NormStats)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let n_train = train_size(data.len(), train_fraction);
    if n_train == 0 || n_train == data.len() {
        return Err(Error::invalid(format!(
            "a {train_fraction} split of {} rows leaves one side empty",
            data.len()
        )));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = data.select(&idx[..n_train]);
    let test = data.select(&idx[n_train..]);
    let stats = NormStats::fit(&train);
    Ok((stats.apply(&train), stats.apply(&test), stats))
}
