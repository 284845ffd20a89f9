//! Mixed-defense equilibrium search over a fixed number of filter radii.
//!
//! For a support `r_1 < … < r_n` the probabilities are pinned by attacker
//! indifference: `E(r_i)·cdf(r_i)` must be the same for every support
//! radius, where `cdf` accumulates mass from the boundary inwards. With
//! `c_i = E(r_1)/E(r_i)` this gives `cdf(r_i) = c_i` and
//! `p_i = c_i − c_{i+1}`. Stacking all `N` points at `r_1` is then an
//! optimal attack, so the defender's loss is
//! `f = N·E(r_1) + Σ p_i·Γ(r_i)`, which [`solve`] minimizes by projected
//! gradient descent with a backtracking line search.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curve::PayoffCurve;
use crate::error::{Error, Result};
use crate::game::{attacker_benefit_threshold, MixedDefense};

/// Gap below which two radii are merged during projection.
pub const MERGE_GAP: f64 = 1e-4;
/// Margin kept above `T_a` so every radius has `E > 0`.
pub const FEASIBLE_MARGIN: f64 = 1e-4;
/// Support entries lighter than this are pruned after convergence.
pub const PRUNE_PROB: f64 = 1e-6;

fn check_support(radii: &[f64]) -> Result<()> {
    if radii.len() < 2 {
        return Err(Error::Solver(format!(
            "a mixed defense needs at least two radii, got {}",
            radii.len()
        )));
    }
    if radii.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Solver("support radii must lie in [0, 1]".into()));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Solver(
            "support radii must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Indifference probabilities for a sorted support.
pub fn find_percentage(radii: &[f64], e: &PayoffCurve) -> Result<Vec<f64>> {
    check_support(radii)?;
    let es: Vec<f64> = radii.iter().map(|&r| e.eval(r)).collect();
    if let Some((r, v)) = radii.iter().zip(&es).find(|(_, &v)| v <= 0.0) {
        return Err(Error::Solver(format!(
            "E({r}) = {v} is not positive; radii inside the attacker's benefit threshold cannot carry mass"
        )));
    }
    let c: Vec<f64> = es.iter().map(|&v| es[0] / v).collect();
    let n = radii.len();
    let mut probs = Vec::with_capacity(n);
    for i in 0..n {
        let next = if i + 1 < n { c[i + 1] } else { 0.0 };
        let p = c[i] - next;
        if p < 0.0 {
            return Err(Error::Solver(format!(
                "E decreases between radii {} and {} ({} > {}); indifference would need negative mass",
                radii[i],
                radii[i + 1],
                es[i],
                es[i + 1]
            )));
        }
        probs.push(p);
    }
    Ok(probs)
}

/// Loss of the indifference mix on `radii` against the stacked attack.
pub fn defender_loss(
    radii: &[f64],
    e: &PayoffCurve,
    gamma: &PayoffCurve,
    n_poison: u32,
) -> Result<f64> {
    let probs = find_percentage(radii, e)?;
    Ok(loss_with_probs(radii, &probs, e, gamma, n_poison))
}

fn loss_with_probs(
    radii: &[f64],
    probs: &[f64],
    e: &PayoffCurve,
    gamma: &PayoffCurve,
    n: u32,
) -> f64 {
    let cost: f64 = radii
        .iter()
        .zip(probs)
        .map(|(&r, &p)| p * gamma.eval(r))
        .sum();
    n as f64 * e.eval(radii[0]) + cost
}

/// Analytic gradient of [`defender_loss`] with respect to each radius,
/// using the one-sided slopes of the piecewise-linear curves.
///
/// With `Δ_i = Γ(r_i) − Γ(r_{i−1})` (`Γ(r_0) = 0`) the loss reads
/// `N·e_1 + Σ c_i·Δ_i`, so for `k ≥ 2`
/// `∂f/∂r_k = p_k·Γ'(r_k) − c_k·(E'(r_k)/e_k)·Δ_k`, and
/// `∂f/∂r_1 = N·E'(r_1) + p_1·Γ'(r_1) + (E'(r_1)/e_1)·Σ_{i≥2} c_i·Δ_i`.
pub fn loss_gradient(
    radii: &[f64],
    e: &PayoffCurve,
    gamma: &PayoffCurve,
    n_poison: u32,
) -> Result<Vec<f64>> {
    let probs = find_percentage(radii, e)?;
    let n = radii.len();
    let es: Vec<f64> = radii.iter().map(|&r| e.eval(r)).collect();
    let gs: Vec<f64> = radii.iter().map(|&r| gamma.eval(r)).collect();
    let c: Vec<f64> = es.iter().map(|&v| es[0] / v).collect();
    let delta = |i: usize| if i == 0 { gs[0] } else { gs[i] - gs[i - 1] };

    let mut grad = vec![0.0; n];
    let tail: f64 = (1..n).map(|i| c[i] * delta(i)).sum();
    let de1 = e.slope(radii[0]);
    grad[0] = n_poison as f64 * de1 + probs[0] * gamma.slope(radii[0]) + de1 / es[0] * tail;
    for k in 1..n {
        grad[k] = probs[k] * gamma.slope(radii[k]) - c[k] * e.slope(radii[k]) / es[k] * delta(k);
    }
    Ok(grad)
}

pub fn choose_initial_radius(n_support: usize, t_a: f64) -> Result<Vec<f64>> {
    if n_support < 2 {
        return Err(Error::Solver("support size must be at least 2".into()));
    }
    if t_a.is_nan() || t_a >= 1.0 {
        return Err(Error::Solver(format!(
            "attacker benefit threshold {t_a} leaves no room for a defense"
        )));
    }
    let t_a = t_a.max(0.0);
    let step = (1.0 - t_a) / (n_support + 1) as f64;
    Ok((1..=n_support).map(|k| t_a + k as f64 * step).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub epsilon: f64,
    pub step: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-7,
            step: 0.05,
            max_iter: 5000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub mix: MixedDefense,
    pub defender_loss: f64,
    pub iterations: usize,
    pub trace: Vec<(usize, f64)>,
    pub converged: bool,
    /// Radii collided during projection and were merged.
    pub merged: bool,
    /// Pruning left a single radius.
    pub degenerate: bool,
}

/// Document layout of a serialized report.
#[derive(Serialize, Deserialize)]
struct ReportDoc {
    radii: Vec<f64>,
    probs: Vec<f64>,
    loss: f64,
    iterations: usize,
    converged: bool,
    merged: bool,
    degenerate: bool,
    trace: Vec<(usize, f64)>,
}

impl SolveReport {
    pub fn radii(&self) -> Vec<f64> {
        self.mix.radii()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.mix.probs()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ReportDoc {
            radii: self.mix.radii(),
            probs: self.mix.probs(),
            loss: self.defender_loss,
            iterations: self.iterations,
            converged: self.converged,
            merged: self.merged,
            degenerate: self.degenerate,
            trace: self.trace.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ReportDoc = serde_json::from_str(text)?;
        if doc.radii.len() != doc.probs.len() {
            return Err(Error::Format("radii and probs differ in length".into()));
        }
        Ok(Self {
            mix: MixedDefense::new(doc.radii.into_iter().zip(doc.probs).collect())?,
            defender_loss: doc.loss,
            iterations: doc.iterations,
            trace: doc.trace,
            converged: doc.converged,
            merged: doc.merged,
            degenerate: doc.degenerate,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut text = self.to_json()?;
        text.push('\n');
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Clamps into `[lo, 1]`, sorts, and merges radii closer than [`MERGE_GAP`].
/// Returns the projected radii and whether a merge happened.
fn project(radii: &[f64], lo: f64) -> (Vec<f64>, bool) {
    let mut r: Vec<f64> = radii.iter().map(|&x| x.clamp(lo, 1.0)).collect();
    r.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(r.len());
    let mut merged = false;
    for x in r {
        match out.last() {
            Some(&prev) if x - prev < MERGE_GAP => merged = true,
            _ => out.push(x),
        }
    }
    (out, merged)
}

/// Runs the descent from the equally spaced initial support.
pub fn solve(
    e: &PayoffCurve,
    gamma: &PayoffCurve,
    n_support: usize,
    n_poison: u32,
    opts: SolveOptions,
) -> Result<SolveReport> {
    if opts.epsilon.is_nan() || opts.epsilon <= 0.0 || opts.step.is_nan() || opts.step <= 0.0 {
        return Err(Error::Solver("epsilon and step must be positive".into()));
    }
    let t_a = attacker_benefit_threshold(e);
    let initial = choose_initial_radius(n_support, t_a)?;
    let spaced = solve_from(e, gamma, &initial, n_poison, opts)?;
    // Piecewise-linear curves with plateaus leave the loss full of local
    // minima, so a second descent starts from the best support on a grid.
    let Some(seeded) = grid_search_radii(e, gamma, n_support, n_poison) else {
        return Ok(spaced);
    };
    match solve_from(e, gamma, &seeded, n_poison, opts) {
        Ok(r) if r.defender_loss < spaced.defender_loss => Ok(r),
        _ => Ok(spaced),
    }
}

/// Resolution of the grid behind [`grid_search_radii`].
pub const SEARCH_GRID: usize = 201;

/// Exact minimizer of the loss over `n_support` radii drawn from a uniform
/// grid plus the knots of both curves, all above `T_a`.
///
/// Writing `f = N·e_1 + g_1 + e_1·Σ_{i≥2} (g_i − g_{i−1})/e_i` makes the tail
/// a chain cost, so the search is a dynamic program over
/// `V_k(j) = min_{j' > j} (g_{j'} − g_j)/e_{j'} + V_{k−1}(j')`.
/// Returns `None` when fewer than `n_support` candidates are feasible.
pub fn grid_search_radii(
    e: &PayoffCurve,
    gamma: &PayoffCurve,
    n_support: usize,
    n_poison: u32,
) -> Option<Vec<f64>> {
    let lo = attacker_benefit_threshold(e) + FEASIBLE_MARGIN;
    let mut cand: Vec<f64> = crate::curve::uniform_grid(SEARCH_GRID)
        .into_iter()
        .chain(e.percentiles())
        .chain(gamma.percentiles())
        .filter(|&p| p >= lo)
        .chain(std::iter::once(lo))
        .filter(|&p| p <= 1.0)
        .collect();
    cand.sort_by(f64::total_cmp);
    cand.dedup_by(|b, a| *b - *a < MERGE_GAP);
    let m = cand.len();
    if n_support < 2 || m < n_support {
        return None;
    }
    let es: Vec<f64> = cand.iter().map(|&r| e.eval(r)).collect();
    let gs: Vec<f64> = cand.iter().map(|&r| gamma.eval(r)).collect();
    if es.iter().any(|&v| v <= 0.0) {
        return None;
    }

    // value[k][j]: best chain cost with exactly k more radii after j.
    let mut value: Vec<Vec<f64>> = vec![vec![0.0; m]];
    let mut next = vec![vec![usize::MAX; m]];
    for k in 1..n_support {
        let prev = &value[k - 1];
        let mut v = vec![f64::INFINITY; m];
        let mut arg = vec![usize::MAX; m];
        for j in 0..m {
            for jn in j + 1..m {
                if es[jn] < es[j] || !prev[jn].is_finite() {
                    continue;
                }
                let cost = (gs[jn] - gs[j]) / es[jn] + prev[jn];
                if cost < v[j] {
                    v[j] = cost;
                    arg[j] = jn;
                }
            }
        }
        value.push(v);
        next.push(arg);
    }
    let tail = &value[n_support - 1];
    let n = n_poison as f64;
    let (mut j, _) = (0..m)
        .filter(|&j| tail[j].is_finite())
        .map(|j| (j, n * es[j] + gs[j] + es[j] * tail[j]))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    let mut radii = vec![cand[j]];
    for k in (1..n_support).rev() {
        j = next[k][j];
        radii.push(cand[j]);
    }
    Some(radii)
}

/// Runs the descent from a caller-chosen support.
pub fn solve_from(
    e: &PayoffCurve,
    gamma: &PayoffCurve,
    initial: &[f64],
    n_poison: u32,
    opts: SolveOptions,
) -> Result<SolveReport> {
    let t_a = attacker_benefit_threshold(e);
    let lo = t_a + FEASIBLE_MARGIN;
    if lo >= 1.0 - MERGE_GAP {
        return Err(Error::Solver(format!(
            "every radius lies below the attacker's benefit threshold {t_a}"
        )));
    }
    let (mut radii, mut merged) = project(initial, lo);
    if radii.len() < 2 {
        return Err(Error::Solver(
            "initial support collapsed to one radius".into(),
        ));
    }
    let eval = |r: &[f64]| -> Option<f64> {
        if r.len() < 2 {
            return None;
        }
        defender_loss(r, e, gamma, n_poison)
            .ok()
            .filter(|v| v.is_finite())
    };
    let mut loss = eval(&radii).ok_or_else(|| {
        Error::Solver("loss is undefined at the initial support; is E monotone?".into())
    })?;
    let mut trace = vec![(0, loss)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let grad = loss_gradient(&radii, e, gamma, n_poison)?;
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax == 0.0 {
            trace.push((iterations, loss));
            converged = true;
            break;
        }
        // Backtracking: halve from `step` until the loss does not increase.
        let mut alpha = opts.step;
        let mut accepted = None;
        while alpha > 1e-14 {
            let cand: Vec<f64> = radii
                .iter()
                .zip(&grad)
                .map(|(r, g)| r - alpha * g / gmax)
                .collect();
            let (cand, did_merge) = project(&cand, lo);
            if let Some(v) = eval(&cand) {
                if v <= loss {
                    accepted = Some((cand, v, did_merge));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((cand, v, did_merge)) = accepted else {
            trace.push((iterations, loss));
            converged = true;
            break;
        };
        let improvement = loss - v;
        radii = cand;
        loss = v;
        merged |= did_merge;
        trace.push((iterations, loss));
        if improvement < opts.epsilon {
            converged = true;
            break;
        }
    }

    let mut probs = find_percentage(&radii, e)?;
    let mut degenerate = false;
    if probs.iter().any(|&p| p < PRUNE_PROB) {
        let kept: Vec<f64> = radii
            .iter()
            .zip(&probs)
            .filter(|(_, &p)| p >= PRUNE_PROB)
            .map(|(&r, _)| r)
            .collect();
        if kept.len() >= 2 {
            probs = find_percentage(&kept, e)?;
            radii = kept;
        } else {
            degenerate = true;
            radii = kept;
            probs = vec![1.0];
        }
        loss = loss_with_probs(&radii, &probs, e, gamma, n_poison);
    }
    let mix = MixedDefense::new(radii.into_iter().zip(probs).collect())?;
    Ok(SolveReport {
        mix,
        defender_loss: loss,
        iterations,
        trace,
        converged,
        merged,
        degenerate,
    })
}
