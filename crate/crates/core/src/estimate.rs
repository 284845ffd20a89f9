//! Monte-Carlo estimates of the attack-effect curve `E` and the
//! genuine-removal cost curve `Γ`.
//!
//! Both are measured as accuracy drops on the held-out split. Sweep cells
//! `(percentile, trial)` run in parallel and are merged by cell index, so the
//! result does not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::PayoffCurve;
use crate::error::{Error, Result};
use crate::game::AttackPlan;
use crate::isotonic::{monotone_fit, Direction};
use crate::sim::attack::craft_attack;
use crate::sim::geometry::filter;
use crate::sim::scenario::{trial_attack_seed, trial_train_seed};
use crate::sim::svm::{train_svm, TrainerConfig};
use crate::sim::{derive_seed, ClassGeometry, LabeledDataset};

/// Raw per-percentile means alongside their monotone fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveEstimate {
    pub raw: Vec<(f64, f64)>,
    pub curve: PayoffCurve,
}

/// Everything a sweep cell needs.
#[derive(Clone, Copy, Debug)]
pub struct EstimateContext<'a> {
    pub train: &'a LabeledDataset,
    pub test: &'a LabeledDataset,
    pub geom: &'a ClassGeometry,
    pub trainer: TrainerConfig,
    pub trials: usize,
    pub seed: u64,
    pub spread: f64,
}

const TAG_GAMMA: u64 = 0x6761;
const TAG_EFFECT: u64 = 0x6566;

impl EstimateContext<'_> {
    fn check(&self, grid: &[f64]) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("curve estimation needs at least one trial"));
        }
        crate::game::check_grid(grid, 2)
    }

    fn accuracy(&self, data: &LabeledDataset, seed: u64) -> Result<f64> {
        Ok(train_svm(data, &self.trainer.with_seed(seed))?.accuracy(self.test))
    }

    /// Unfiltered, unpoisoned accuracy for each trial.
    fn baselines(&self, seed: u64) -> Result<Vec<f64>> {
        (0..self.trials)
            .into_par_iter()
            .map(|t| self.accuracy(self.train, trial_train_seed(seed, t)))
            .collect()
    }

    /// Evaluates `cell(p, trial)` over the grid and averages over trials.
    fn sweep<F>(&self, grid: &[f64], cell: F) -> Result<Vec<f64>>
    where
        F: Fn(f64, usize) -> Result<f64> + Sync,
    {
        let t = self.trials;
        let vals = (0..grid.len() * t)
            .into_par_iter()
            .map(|k| cell(grid[k / t], k % t))
            .collect::<Result<Vec<f64>>>()?;
        Ok(vals
            .chunks(t)
            .map(|c| c.iter().sum::<f64>() / t as f64)
            .collect())
    }
}

/// `Γ(θ)`: mean accuracy lost by filtering clean training data at `θ`,
/// clamped at 0 and fitted non-increasing.
pub fn estimate_gamma(ctx: &EstimateContext, grid: &[f64]) -> Result<CurveEstimate> {
    ctx.check(grid)?;
    let seed = derive_seed(ctx.seed, &[TAG_GAMMA]);
    let base = ctx.baselines(seed)?;
    let raw = ctx.sweep(grid, |theta, t| {
        let kept = filter(ctx.train, ctx.geom, theta)?;
        let acc = ctx.accuracy(&kept, trial_train_seed(seed, t))?;
        Ok(base[t] - acc)
    })?;
    let raw: Vec<(f64, f64)> = grid
        .iter()
        .copied()
        .zip(raw.into_iter().map(|v| v.max(0.0)))
        .collect();
    let curve = monotone_fit(&raw, Direction::Decreasing)?;
    Ok(CurveEstimate { raw, curve })
}

/// `E(r)`: mean accuracy lost per poisoning point when `n_poison` points sit
/// at percentile `r` and nothing is filtered, fitted non-decreasing.
pub fn estimate_e(ctx: &EstimateContext, grid: &[f64], n_poison: u32) -> Result<CurveEstimate> {
    ctx.check(grid)?;
    if n_poison == 0 {
        return Err(Error::invalid(
            "estimating E needs at least one poisoning point",
        ));
    }
    let seed = derive_seed(ctx.seed, &[TAG_EFFECT]);
    let base = ctx.baselines(seed)?;
    let raw = ctx.sweep(grid, |r, t| {
        let plan = AttackPlan::single(r, n_poison)?;
        let poisoned = craft_attack(
            ctx.train,
            ctx.geom,
            &plan,
            trial_attack_seed(seed, t),
            ctx.spread,
        )?;
        let acc = ctx.accuracy(&poisoned, trial_train_seed(seed, t))?;
        Ok((base[t] - acc) / n_poison as f64)
    })?;
    let raw: Vec<(f64, f64)> = grid.iter().copied().zip(raw).collect();
    let curve = monotone_fit(&raw, Direction::Increasing)?;
    Ok(CurveEstimate { raw, curve })
}
