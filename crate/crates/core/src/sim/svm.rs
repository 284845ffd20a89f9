use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Class, LabeledDataset};
use crate::error::{Error, Result};

/// Step-size decay: epoch `t` uses `learning_rate / (1 + t·LR_DECAY)`.
pub const LR_DECAY: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            epochs: 5000,
            learning_rate: 0.01,
            regularization: 1e-4,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(Error::invalid("regularization must be non-negative"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl SvmModel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Class {
        if self.score(x) >= 0.0 {
            Class::Pos
        } else {
            Class::Neg
        }
    }

    pub fn accuracy(&self, data: &LabeledDataset) -> f64 {
        let hits = data
            .rows()
            .zip(data.labels())
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        hits as f64 / data.len().max(1) as f64
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(λ/2)·‖w‖² + mean hinge loss`; the bias is not regularized.
pub fn objective(data: &LabeledDataset, model: &SvmModel, regularization: f64) -> f64 {
    let hinge: f64 = data
        .rows()
        .zip(data.labels())
        .map(|(x, y)| (1.0 - y.sign() * model.score(x)).max(0.0))
        .sum();
    0.5 * regularization * dot(&model.weights, &model.weights) + hinge / data.len() as f64
}

/// Subgradient of [`objective`], taking 0 for the hinge at margin exactly 1.
pub fn subgradient(
    data: &LabeledDataset,
    model: &SvmModel,
    regularization: f64,
) -> (Vec<f64>, f64) {
    let order: Vec<usize> = (0..data.len()).collect();
    let mut gw = vec![0.0; data.dim()];
    let (gb, _) = accumulate(data, model, &order, &mut gw);
    finish(data.len(), model, regularization, &mut gw);
    (gw, gb / data.len() as f64)
}

/// Adds `−y·x` over margin violators into `gw`, returning the bias sum and
/// the summed hinge loss.
fn accumulate(
    data: &LabeledDataset,
    model: &SvmModel,
    order: &[usize],
    gw: &mut [f64],
) -> (f64, f64) {
    gw.iter_mut().for_each(|g| *g = 0.0);
    let mut gb = 0.0;
    let mut hinge = 0.0;
    for &i in order {
        let x = data.row(i);
        let y = data.labels()[i].sign();
        let m = y * model.score(x);
        if m < 1.0 {
            hinge += 1.0 - m;
            gb -= y;
            gw.iter_mut().zip(x).for_each(|(g, xi)| *g -= y * xi);
        }
    }
    (gb, hinge)
}

fn finish(n: usize, model: &SvmModel, regularization: f64, gw: &mut [f64]) {
    let inv = 1.0 / n as f64;
    gw.iter_mut()
        .zip(&model.weights)
        .for_each(|(g, w)| *g = *g * inv + regularization * w);
}

/// Full-batch subgradient descent from `w = 0`, one step per epoch. Rows are
/// visited in a fresh seeded order each epoch.
pub fn train_svm(train: &LabeledDataset, cfg: &TrainerConfig) -> Result<SvmModel> {
    cfg.validate()?;
    for c in Class::BOTH {
        if train.count(c, None) == 0 {
            return Err(Error::invalid(format!(
                "training data has no rows of class {}",
                c.name()
            )));
        }
    }
    let n = train.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut model = SvmModel::zeros(train.dim());
    let mut gw = vec![0.0; train.dim()];
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (gb, hinge) = accumulate(train, &model, &order, &mut gw);
        let loss =
            0.5 * cfg.regularization * dot(&model.weights, &model.weights) + hinge / n as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        finish(n, &model, cfg.regularization, &mut gw);
        let lr = cfg.learning_rate / (1.0 + epoch as f64 * LR_DECAY);
        model
            .weights
            .iter_mut()
            .zip(&gw)
            .for_each(|(w, g)| *w -= lr * g);
        model.bias -= lr * gb / n as f64;
    }
    if model.weights.iter().any(|w| !w.is_finite()) || !model.bias.is_finite() {
        return Err(Error::Diverged { epoch: cfg.epochs });
    }
    Ok(model)
}
