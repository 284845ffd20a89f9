//! Strategies, payoffs and best responses of the poisoning game.
//!
//! The attacker (maximizer) places poisoning points at percentile radii
//! from the class centroids; the defender (minimizer) removes everything
//! beyond a filter percentile. A point at `r` survives a filter at `θ`
//! iff `θ >= r`. The attacker's payoff is
//! `Σ_{r_i <= θ} E(r_i)·n_i + Γ(θ)`; the defender's is its negation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{check_percentile, PayoffCurve};
use crate::error::{Error, Result};

/// The attacker's pure strategy: `(radius percentile, point count)` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackPlan {
    entries: Vec<(f64, u32)>,
}

impl AttackPlan {
    pub fn new(entries: Vec<(f64, u32)>) -> Result<Self> {
        for &(r, _) in &entries {
            check_percentile(r, "attack radius")?;
        }
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid("attack radii must be strictly increasing"));
        }
        let total: u64 = entries.iter().map(|e| e.1 as u64).sum();
        if total == 0 {
            return Err(Error::invalid("attack plan must place at least one point"));
        }
        Ok(Self { entries })
    }

    /// All `n` points at a single radius.
    pub fn single(radius: f64, n: u32) -> Result<Self> {
        Self::new(vec![(radius, n)])
    }

    pub fn entries(&self) -> &[(f64, u32)] {
        &self.entries
    }

    pub fn total(&self) -> u32 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn min_radius(&self) -> f64 {
        self.entries[0].0
    }
}

/// The defender's pure strategy: the filter percentile.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DefenseRadius(f64);

impl DefenseRadius {
    pub fn new(theta: f64) -> Result<Self> {
        check_percentile(theta, "filter radius")?;
        Ok(Self(theta))
    }

    /// The boundary `B`: filter nothing.
    pub const BOUNDARY: DefenseRadius = DefenseRadius(1.0);

    pub fn theta(self) -> f64 {
        self.0
    }
}

/// A finite-support mixed defense.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedDefense {
    support: Vec<(f64, f64)>,
}

impl MixedDefense {
    pub fn new(support: Vec<(f64, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::invalid("mixed defense needs a nonempty support"));
        }
        for &(t, p) in &support {
            check_percentile(t, "support radius")?;
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::invalid(format!("probability {p} at {t} is invalid")));
            }
        }
        if support.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid("support radii must be strictly increasing"));
        }
        let total: f64 = support.iter().map(|s| s.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { support })
    }

    pub fn pure(theta: DefenseRadius) -> Self {
        Self {
            support: vec![(theta.theta(), 1.0)],
        }
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    pub fn radii(&self) -> Vec<f64> {
        self.support.iter().map(|s| s.0).collect()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.support.iter().map(|s| s.1).collect()
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        self.support
            .iter()
            .find(|s| s.0 == theta)
            .map_or(0.0, |s| s.1)
    }

    /// Probability that the filter radius is at least `theta`, i.e. mass
    /// counted from the boundary towards the centroid. A point placed at
    /// `theta` survives with exactly this probability.
    pub fn cdf(&self, theta: f64) -> f64 {
        self.support
            .iter()
            .filter(|s| s.0 >= theta)
            .map(|s| s.1)
            .sum()
    }

    /// Strongest filter in the support.
    pub fn min_radius(&self) -> f64 {
        self.support[0].0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DefenseRadius {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(t, p) in &self.support {
            acc += p;
            if u < acc {
                return DefenseRadius(t);
            }
        }
        DefenseRadius(self.support[self.support.len() - 1].0)
    }
}

/// Attacker payoff of a pure strategy pair.
pub fn pure_payoff(
    plan: &AttackPlan,
    theta: DefenseRadius,
    e: &PayoffCurve,
    gamma: &PayoffCurve,
) -> f64 {
    let theta = theta.theta();
    let attack: f64 = plan
        .entries
        .iter()
        .filter(|&&(r, _)| theta >= r)
        .map(|&(r, n)| e.eval(r) * n as f64)
        .sum();
    attack + gamma.eval(theta)
}

/// Defender utility; the game is zero-sum.
pub fn defender_utility(
    plan: &AttackPlan,
    theta: DefenseRadius,
    e: &PayoffCurve,
    gamma: &PayoffCurve,
) -> f64 {
    -pure_payoff(plan, theta, e, gamma)
}

/// Attacker payoff of a pure attack against a mixed defense.
pub fn expected_payoff(
    plan: &AttackPlan,
    mix: &MixedDefense,
    e: &PayoffCurve,
    gamma: &PayoffCurve,
) -> f64 {
    let attack: f64 = plan
        .entries
        .iter()
        .map(|&(r, n)| n as f64 * e.eval(r) * mix.cdf(r))
        .sum();
    let cost: f64 = mix.support.iter().map(|&(t, p)| p * gamma.eval(t)).sum();
    attack + cost
}

/// `T_a`: the smallest percentile beyond which a poisoning point pays off.
///
/// Returns 0 when `E > 0` everywhere and 1 when `E <= 0` everywhere.
pub fn attacker_benefit_threshold(e: &PayoffCurve) -> f64 {
    let k = e.knots();
    if k[0].1 > 0.0 {
        return 0.0;
    }
    for w in k.windows(2) {
        let ((p0, v0), (p1, v1)) = (w[0], w[1]);
        if v0 <= 0.0 && v1 > 0.0 {
            return p0 + (0.0 - v0) / (v1 - v0) * (p1 - p0);
        }
    }
    1.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackerResponse {
    pub plan: AttackPlan,
    /// The filter sits inside `T_a`: no placement profits, and the plan is
    /// the canonical representative with every point at the boundary.
    pub blocked: bool,
}

pub fn best_response_attacker(
    theta: DefenseRadius,
    e: &PayoffCurve,
    n_total: u32,
) -> Result<AttackerResponse> {
    if n_total == 0 {
        return Err(Error::invalid("attack budget must be positive"));
    }
    let t_a = attacker_benefit_threshold(e);
    if theta.theta() >= t_a {
        Ok(AttackerResponse {
            plan: AttackPlan::single(theta.theta(), n_total)?,
            blocked: false,
        })
    } else {
        Ok(AttackerResponse {
            plan: AttackPlan::single(1.0, n_total)?,
            blocked: true,
        })
    }
}

/// Grid point minimizing the attacker's payoff against `plan`; ties go to
/// the larger radius.
pub fn best_response_defender(
    plan: &AttackPlan,
    e: &PayoffCurve,
    gamma: &PayoffCurve,
    grid: &[f64],
) -> Result<DefenseRadius> {
    check_grid(grid, 1)?;
    let mut best = (f64::INFINITY, grid[0]);
    for &t in grid {
        let v = pure_payoff(plan, DefenseRadius(t), e, gamma);
        if v <= best.0 {
            best = (v, t);
        }
    }
    Ok(DefenseRadius(best.1))
}

pub(crate) fn check_grid(grid: &[f64], min_len: usize) -> Result<()> {
    if grid.len() < min_len {
        return Err(Error::invalid(format!(
            "grid needs at least {min_len} points"
        )));
    }
    for &p in grid {
        check_percentile(p, "grid point")?;
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("grid must be strictly increasing"));
    }
    Ok(())
}

/// Searches the grid for a pure equilibrium among single-radius attacks.
///
/// A pair `(r, θ)` qualifies when `r` maximizes the attacker payoff in
/// column `θ` and `θ` minimizes it in row `r`. When several pairs qualify
/// the one with the largest `θ` (then largest `r`) is returned.
pub fn find_pure_ne(
    e: &PayoffCurve,
    gamma: &PayoffCurve,
    n_total: u32,
    grid: &[f64],
) -> Result<Option<(AttackPlan, DefenseRadius)>> {
    check_grid(grid, 2)?;
    if n_total == 0 {
        return Err(Error::invalid("attack budget must be positive"));
    }
    let n = grid.len();
    let nf = n_total as f64;
    let es: Vec<f64> = grid.iter().map(|&r| nf * e.eval(r)).collect();
    let gs: Vec<f64> = grid.iter().map(|&t| gamma.eval(t)).collect();
    let payoff = |i: usize, j: usize| {
        if grid[j] >= grid[i] {
            es[i] + gs[j]
        } else {
            gs[j]
        }
    };

    let col_max: Vec<f64> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| payoff(i, j))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let row_min: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| payoff(i, j)).fold(f64::INFINITY, f64::min))
        .collect();

    for j in (0..n).rev() {
        for i in (0..n).rev() {
            let v = payoff(i, j);
            if v >= col_max[j] && v <= row_min[i] {
                return Ok(Some((
                    AttackPlan::single(grid[i], n_total)?,
                    DefenseRadius(grid[j]),
                )));
            }
        }
    }
    Ok(None)
}
