//! Attack/defense sweeps on a fixed train/test split.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AttackPlan, DefenseRadius, MixedDefense};
use crate::sim::dataset::{normalize_and_split, LabeledDataset, NormStats};
use crate::sim::geometry::{ClassGeometry, GeometryMode};
use crate::sim::scenario::{evaluate_scenario, Defense, ScenarioConfig, ScenarioResult};

/// Optimal attacks sit just inside the smallest filter radius they face.
pub const ATTACK_SHRINK: f64 = 0.99;

pub fn optimal_attack_pure(theta: f64, n_poison: u32) -> Result<AttackPlan> {
    AttackPlan::single(ATTACK_SHRINK * theta, n_poison)
}

pub fn optimal_attack_mixed(mix: &MixedDefense, n_poison: u32) -> Result<AttackPlan> {
    AttackPlan::single(ATTACK_SHRINK * mix.min_radius(), n_poison)
}

/// Poisoning points for a budget expressed as a fraction of the training set.
pub fn budget_points(n_train: usize, fraction: f64) -> Result<u32> {
    if !(fraction > 0.0 && fraction.is_finite()) {
        return Err(Error::invalid(format!(
            "budget fraction {fraction} must be positive"
        )));
    }
    let n = (fraction * n_train as f64).round();
    if n < 1.0 {
        return Err(Error::invalid("budget rounds to zero poisoning points"));
    }
    Ok(n as u32)
}

/// Normalized split plus the defender's clean geometry.
#[derive(Clone, Debug)]
pub struct Split {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub stats: NormStats,
    pub geom: ClassGeometry,
}

impl Split {
    pub fn prepare(data: &LabeledDataset, train_fraction: f64, seed: u64) -> Result<Self> {
        let (train, test, stats) = normalize_and_split(data, train_fraction, seed)?;
        let geom = ClassGeometry::fit(&train, GeometryMode::Clean)?;
        Ok(Self {
            train,
            test,
            stats,
            geom,
        })
    }

    pub fn evaluate(
        &self,
        attack: Option<&AttackPlan>,
        defense: &Defense,
        cfg: &ScenarioConfig,
    ) -> Result<ScenarioResult> {
        evaluate_scenario(&self.train, &self.test, &self.geom, attack, defense, cfg)
    }

    /// Each pure filter on `grid` against its own optimal attack.
    pub fn pure_defenses(
        &self,
        grid: &[f64],
        n_poison: u32,
        cfg: &ScenarioConfig,
    ) -> Result<Vec<(f64, ScenarioResult)>> {
        grid.par_iter()
            .map(|&theta| {
                let plan = optimal_attack_pure(theta, n_poison)?;
                let d = Defense::Pure(DefenseRadius::new(theta)?);
                Ok((theta, self.evaluate(Some(&plan), &d, cfg)?))
            })
            .collect()
    }

    /// A mixed filter against the stack-at-smallest-radius attack.
    pub fn mixed_defense(
        &self,
        mix: &MixedDefense,
        n_poison: u32,
        cfg: &ScenarioConfig,
    ) -> Result<ScenarioResult> {
        let plan = optimal_attack_mixed(mix, n_poison)?;
        self.evaluate(Some(&plan), &Defense::Mixed(mix.clone()), cfg)
    }

    /// Filter strength sweep with and without the optimal attack.
    pub fn sweep(
        &self,
        grid: &[f64],
        n_poison: u32,
        cfg: &ScenarioConfig,
    ) -> Result<Vec<SweepRow>> {
        let clean: Vec<f64> = grid
            .par_iter()
            .map(|&theta| {
                let d = Defense::Pure(DefenseRadius::new(theta)?);
                Ok(self.evaluate(None, &d, cfg)?.mean_accuracy)
            })
            .collect::<Result<_>>()?;
        let attacked = self.pure_defenses(grid, n_poison, cfg)?;
        let mut rows: Vec<SweepRow> = grid
            .iter()
            .zip(clean)
            .zip(attacked)
            .map(|((&theta, c), (_, a))| SweepRow {
                removal_fraction: 1.0 - theta,
                accuracy_clean: c,
                accuracy_attacked: a.mean_accuracy,
            })
            .collect();
        rows.sort_by(|a, b| a.removal_fraction.total_cmp(&b.removal_fraction));
        Ok(rows)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub removal_fraction: f64,
    pub accuracy_clean: f64,
    pub accuracy_attacked: f64,
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn read_sweep<R: Read>(reader: R, origin: &Path) -> Result<Vec<SweepRow>> {
    csv::Reader::from_reader(reader)
        .deserialize()
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

/// Removal fraction at which the attacked accuracy peaks (first on ties).
pub fn attacked_peak(rows: &[SweepRow]) -> Option<SweepRow> {
    rows.iter().copied().reduce(|best, r| {
        if r.accuracy_attacked > best.accuracy_attacked {
            r
        } else {
            best
        }
    })
}

/// Whether the clean accuracy never rises by more than `band` as removal
/// grows.
pub fn clean_is_non_increasing(rows: &[SweepRow], band: f64) -> bool {
    let mut low = f64::INFINITY;
    rows.iter().all(|r| {
        let ok = r.accuracy_clean <= low + band;
        low = low.min(r.accuracy_clean);
        ok
    })
}
