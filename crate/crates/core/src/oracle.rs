//! Discretized zero-sum game solved by fictitious play.
//!
//! Rows are single-radius attacks `{(r_i, N)}`, columns are pure filter
//! radii, and the attacker maximizes. The fictitious-play value bracket is
//! an independent check on the continuous equilibrium search in
//! [`crate::solver`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::PayoffCurve;
use crate::error::{Error, Result};
use crate::game::check_grid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameMatrix {
    attacker_radii: Vec<f64>,
    defender_thetas: Vec<f64>,
    payoff: Vec<f64>,
}

impl GameMatrix {
    /// Row-major payoff to the row player.
    pub fn new(
        attacker_radii: Vec<f64>,
        defender_thetas: Vec<f64>,
        payoff: Vec<f64>,
    ) -> Result<Self> {
        if attacker_radii.is_empty() || defender_thetas.is_empty() {
            return Err(Error::invalid(
                "game matrix needs at least one row and one column",
            ));
        }
        if payoff.len() != attacker_radii.len() * defender_thetas.len() {
            return Err(Error::invalid(format!(
                "payoff has {} entries, expected {}×{}",
                payoff.len(),
                attacker_radii.len(),
                defender_thetas.len()
            )));
        }
        if payoff.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("game matrix entries must be finite"));
        }
        Ok(Self {
            attacker_radii,
            defender_thetas,
            payoff,
        })
    }

    pub fn rows(&self) -> usize {
        self.attacker_radii.len()
    }

    pub fn cols(&self) -> usize {
        self.defender_thetas.len()
    }

    pub fn attacker_radii(&self) -> &[f64] {
        &self.attacker_radii
    }

    pub fn defender_thetas(&self) -> &[f64] {
        &self.defender_thetas
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.payoff[i * self.cols() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.payoff[i * c..(i + 1) * c]
    }
}

pub fn build_matrix(
    e: &PayoffCurve,
    gamma: &PayoffCurve,
    n_poison: u32,
    grid: &[f64],
) -> Result<GameMatrix> {
    check_grid(grid, 1)?;
    let n = n_poison as f64;
    let payoff: Vec<f64> = grid
        .par_iter()
        .flat_map_iter(|&r| {
            let hit = n * e.eval(r);
            grid.iter().map(move |&t| {
                if t >= r {
                    hit + gamma.eval(t)
                } else {
                    gamma.eval(t)
                }
            })
        })
        .collect();
    GameMatrix::new(grid.to_vec(), grid.to_vec(), payoff)
}

/// Best-so-far value bracket after `iteration` rounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSolution {
    pub attacker_mix: Vec<f64>,
    pub defender_mix: Vec<f64>,
    /// Guaranteed by `attacker_mix` against every column.
    pub value_lower: f64,
    /// Conceded by `defender_mix` to the best row.
    pub value_upper: f64,
    pub checkpoints: Vec<Checkpoint>,
}

impl MatrixSolution {
    pub fn gap(&self) -> f64 {
        self.value_upper - self.value_lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.value_upper + self.value_lower)
    }
}

pub const CHECKPOINT_EVERY: usize = 10_000;

fn normalize(counts: &[u64], total: u64) -> Vec<f64> {
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Payoff of each row against a column mixture.
pub fn row_values(m: &GameMatrix, defender_mix: &[f64]) -> Vec<f64> {
    (0..m.rows())
        .map(|i| m.row(i).iter().zip(defender_mix).map(|(a, q)| a * q).sum())
        .collect()
}

/// Payoff of each column against a row mixture.
pub fn col_values(m: &GameMatrix, attacker_mix: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for (i, &p) in attacker_mix.iter().enumerate() {
        if p != 0.0 {
            for (o, a) in out.iter_mut().zip(m.row(i)) {
                *o += p * a;
            }
        }
    }
    out
}

/// Simultaneous fictitious play for `iterations` rounds.
///
/// The returned mixes are the empirical frequencies at the rounds where the
/// respective bound was best, so the bracket only ever tightens.
pub fn solve_matrix_game(m: &GameMatrix, iterations: usize) -> Result<MatrixSolution> {
    if iterations == 0 {
        return Err(Error::invalid(
            "fictitious play needs at least one iteration",
        ));
    }
    let (nr, nc) = (m.rows(), m.cols());
    // row_acc[i]: cumulative payoff of row i against the defender's plays.
    // col_acc[j]: cumulative payoff of column j against the attacker's plays.
    let mut row_acc = vec![0.0; nr];
    let mut col_acc = vec![0.0; nc];
    let mut row_counts = vec![0u64; nr];
    let mut col_counts = vec![0u64; nc];

    let mut best_lower = f64::NEG_INFINITY;
    let mut best_upper = f64::INFINITY;
    let mut best_attacker = Vec::new();
    let mut best_defender = Vec::new();
    let mut checkpoints = Vec::new();

    for t in 1..=iterations {
        // Attacker: first maximizing row. Defender: last minimizing column,
        // i.e. the least aggressive filter among ties.
        let mut i_star = 0;
        for i in 1..nr {
            if row_acc[i] > row_acc[i_star] {
                i_star = i;
            }
        }
        let mut j_star = nc - 1;
        for j in (0..nc - 1).rev() {
            if col_acc[j] < col_acc[j_star] {
                j_star = j;
            }
        }
        row_counts[i_star] += 1;
        col_counts[j_star] += 1;
        for (acc, a) in col_acc.iter_mut().zip(m.row(i_star)) {
            *acc += a;
        }
        for (i, acc) in row_acc.iter_mut().enumerate() {
            *acc += m.entry(i, j_star);
        }

        let tf = t as f64;
        let lower = col_acc.iter().cloned().fold(f64::INFINITY, f64::min) / tf;
        let upper = row_acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / tf;
        if lower > best_lower {
            best_lower = lower;
            best_attacker.clone_from(&row_counts);
            best_attacker.push(t as u64);
        }
        if upper < best_upper {
            best_upper = upper;
            best_defender.clone_from(&col_counts);
            best_defender.push(t as u64);
        }
        if t % CHECKPOINT_EVERY == 0 || t == iterations {
            checkpoints.push(Checkpoint {
                iteration: t,
                lower: best_lower,
                upper: best_upper,
            });
        }
    }

    let at = best_attacker.pop().unwrap();
    let dt = best_defender.pop().unwrap();
    Ok(MatrixSolution {
        attacker_mix: normalize(&best_attacker, at),
        defender_mix: normalize(&best_defender, dt),
        value_lower: best_lower,
        value_upper: best_upper,
        checkpoints,
    })
}
