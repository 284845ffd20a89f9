use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::attack::{craft_attack, DEFAULT_SPREAD};
use super::dataset::LabeledDataset;
use super::derive_seed;
use super::geometry::{filter, ClassGeometry, GeometryMode};
use super::svm::{train_svm, TrainerConfig};
use crate::error::{Error, Result};
use crate::game::{AttackPlan, DefenseRadius, MixedDefense};

#[derive(Clone, Debug, PartialEq)]
pub enum Defense {
    None,
    Pure(DefenseRadius),
    Mixed(MixedDefense),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub trainer: TrainerConfig,
    pub trials: usize,
    pub seed: u64,
    pub spread: f64,
    pub geometry: GeometryMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            trainer: TrainerConfig::default(),
            trials: 1,
            seed: 0,
            spread: DEFAULT_SPREAD,
            geometry: GeometryMode::Clean,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Filter percentile used in this trial; 1 when no filter runs.
    pub theta: f64,
    pub attacked: bool,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub mean_accuracy: f64,
    pub trials: Vec<TrialRecord>,
}

/// Seed streams within one trial.
const STREAM_THETA: u64 = 0;
const STREAM_ATTACK: u64 = 1;
const STREAM_TRAIN: u64 = 2;

/// Seed the trainer uses in `trial` of a scenario seeded with `seed`.
pub fn trial_train_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, &[trial as u64, STREAM_TRAIN])
}

/// Seed the attack crafter uses in `trial`.
pub fn trial_attack_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, &[trial as u64, STREAM_ATTACK])
}

/// Runs `cfg.trials` independent trials: sample a filter radius, inject the
/// attack, filter, train, and score on `test`.
pub fn evaluate_scenario(
    train: &LabeledDataset,
    test: &LabeledDataset,
    geom: &ClassGeometry,
    attack: Option<&AttackPlan>,
    defense: &Defense,
    cfg: &ScenarioConfig,
) -> Result<ScenarioResult> {
    if cfg.trials == 0 {
        return Err(Error::invalid("a scenario needs at least one trial"));
    }
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(train, test, geom, attack, defense, cfg, t))
        .collect::<Result<Vec<_>>>()?;
    let mean_accuracy = trials.iter().map(|r| r.accuracy).sum::<f64>() / trials.len() as f64;
    Ok(ScenarioResult {
        mean_accuracy,
        trials,
    })
}

fn run_trial(
    train: &LabeledDataset,
    test: &LabeledDataset,
    geom: &ClassGeometry,
    attack: Option<&AttackPlan>,
    defense: &Defense,
    cfg: &ScenarioConfig,
    trial: usize,
) -> Result<TrialRecord> {
    let theta = match defense {
        Defense::None => None,
        Defense::Pure(t) => Some(t.theta()),
        Defense::Mixed(m) => {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[trial as u64, STREAM_THETA]));
            Some(m.sample(&mut rng).theta())
        }
    };
    let data = match attack {
        Some(plan) => craft_attack(
            train,
            geom,
            plan,
            trial_attack_seed(cfg.seed, trial),
            cfg.spread,
        )?,
        None => train.clone(),
    };
    let data = match theta {
        Some(t) => match cfg.geometry {
            GeometryMode::Clean => filter(&data, geom, t)?,
            GeometryMode::Blind => {
                filter(&data, &ClassGeometry::fit(&data, GeometryMode::Blind)?, t)?
            }
        },
        None => data,
    };
    let model = train_svm(
        &data,
        &cfg.trainer.with_seed(trial_train_seed(cfg.seed, trial)),
    )?;
    Ok(TrialRecord {
        trial,
        theta: theta.unwrap_or(1.0),
        attacked: attack.is_some(),
        accuracy: model.accuracy(test),
    })
}

pub fn write_records<W: Write>(records: &[TrialRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn read_records<R: Read>(reader: R, origin: &Path) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize()
        .enumerate()
        .map(|(i, rec)| {
            rec.map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: i as u64 + 2,
                message: e.to_string(),
            })
        })
        .collect()
}
