//! Orchestration behind the `poisongame` binary.
//!
//! Each stage reads and writes plain files so later stages can rerun without
//! repeating the expensive sweeps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use poisongame::experiment::{budget_points, write_sweep};
use poisongame::sim::scenario::write_records;
use poisongame::sim::{load_csv, GeometryMode, ScenarioConfig, ScenarioResult, TrainerConfig};
use poisongame::{
    attacker_benefit_threshold, build_matrix, estimate_e, estimate_gamma, find_pure_ne, solve,
    solve_matrix_game, uniform_grid, CurveEstimate, EstimateContext, PayoffCurve, SolveOptions,
    SolveReport, Split, SweepRow,
};

pub const EFFECT_FILE: &str = "effect.csv";
pub const GAMMA_FILE: &str = "gamma.csv";
pub const EFFECT_RAW_FILE: &str = "effect_raw.csv";
pub const GAMMA_RAW_FILE: &str = "gamma_raw.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const ORACLE_FILE: &str = "oracle.json";
pub const LOSSES_FILE: &str = "solve_losses.csv";
pub const SUMMARY_FILE: &str = "evaluate_summary.csv";

/// Epochs used by `--fast`.
pub const FAST_EPOCHS: usize = 500;

pub fn solve_file(n_support: usize) -> String {
    format!("solve_n{n_support}.json")
}

pub fn trials_file(label: &str) -> String {
    format!("trials_{label}.csv")
}

/// How the dataset is loaded, split and attacked.
#[derive(Clone, Debug)]
pub struct DataOptions {
    pub data: PathBuf,
    pub seed: u64,
    pub train_fraction: f64,
    /// Poisoning budget as a fraction of the training set.
    pub budget: f64,
    pub trainer: TrainerConfig,
    pub spread: f64,
    pub geometry: GeometryMode,
}

impl Default for DataOptions {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data/spambase_keel.data"),
            seed: 1,
            train_fraction: 0.7,
            budget: 0.2,
            trainer: TrainerConfig::default(),
            spread: poisongame::sim::DEFAULT_SPREAD,
            geometry: GeometryMode::Clean,
        }
    }
}

/// A loaded split with its poisoning budget in points.
pub struct Experiment {
    pub split: Split,
    pub n_poison: u32,
    pub opts: DataOptions,
}

impl Experiment {
    pub fn load(opts: &DataOptions) -> Result<Self> {
        let data = load_csv(&opts.data)?;
        let split = Split::prepare(&data, opts.train_fraction, opts.seed)?;
        let n_poison = budget_points(split.train.len(), opts.budget)?;
        Ok(Self {
            split,
            n_poison,
            opts: opts.clone(),
        })
    }

    pub fn scenario(&self, trials: usize) -> ScenarioConfig {
        ScenarioConfig {
            trainer: self.opts.trainer,
            trials,
            seed: self.opts.seed,
            spread: self.opts.spread,
            geometry: self.opts.geometry,
        }
    }

    pub fn sweep(&self, grid_points: usize, trials: usize) -> Result<Vec<SweepRow>> {
        Ok(self.split.sweep(
            &uniform_grid(grid_points),
            self.n_poison,
            &self.scenario(trials),
        )?)
    }

    pub fn curves(&self, grid_points: usize, trials: usize) -> Result<Curves> {
        let ctx = EstimateContext {
            train: &self.split.train,
            test: &self.split.test,
            geom: &self.split.geom,
            trainer: self.opts.trainer,
            trials,
            seed: self.opts.seed,
            spread: self.opts.spread,
        };
        let grid = uniform_grid(grid_points);
        Ok(Curves {
            effect: estimate_e(&ctx, &grid, self.n_poison)?,
            gamma: estimate_gamma(&ctx, &grid)?,
        })
    }

    /// Each labeled mixed defense and every pure grid defense, each against
    /// its own optimal attack.
    pub fn evaluate(
        &self,
        reports: &[(String, SolveReport)],
        grid_points: usize,
        trials: usize,
    ) -> Result<Evaluation> {
        let cfg = self.scenario(trials);
        let pure = self
            .split
            .pure_defenses(&uniform_grid(grid_points), self.n_poison, &cfg)?;
        let mixed = reports
            .iter()
            .map(|(label, r)| {
                Ok((
                    label.clone(),
                    self.split.mixed_defense(&r.mix, self.n_poison, &cfg)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Evaluation { pure, mixed })
    }
}

pub struct Curves {
    pub effect: CurveEstimate,
    pub gamma: CurveEstimate,
}

impl Curves {
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.effect.curve.save(dir.join(EFFECT_FILE))?;
        self.gamma.curve.save(dir.join(GAMMA_FILE))?;
        PayoffCurve::new(self.effect.raw.clone())?.save(dir.join(EFFECT_RAW_FILE))?;
        PayoffCurve::new(self.gamma.raw.clone())?.save(dir.join(GAMMA_RAW_FILE))?;
        Ok(())
    }
}

pub fn load_curves(effect: &Path, gamma: &Path) -> Result<(PayoffCurve, PayoffCurve)> {
    Ok((PayoffCurve::load(effect)?, PayoffCurve::load(gamma)?))
}

pub struct Evaluation {
    pub pure: Vec<(f64, ScenarioResult)>,
    pub mixed: Vec<(String, ScenarioResult)>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SummaryRow {
    pub defense: String,
    pub theta: Option<f64>,
    pub accuracy: f64,
}

impl Evaluation {
    /// Highest pure-defense accuracy and its filter percentile.
    pub fn best_pure(&self) -> Option<(f64, f64)> {
        self.pure
            .iter()
            .map(|(t, r)| (*t, r.mean_accuracy))
            .reduce(|a, b| if b.1 > a.1 { b } else { a })
    }

    pub fn mixed_accuracy(&self, label: &str) -> Option<f64> {
        self.mixed
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, r)| r.mean_accuracy)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mixed = self.mixed.iter().map(|(l, r)| SummaryRow {
            defense: l.clone(),
            theta: None,
            accuracy: r.mean_accuracy,
        });
        let pure = self.pure.iter().map(|(t, r)| SummaryRow {
            defense: "pure".into(),
            theta: Some(*t),
            accuracy: r.mean_accuracy,
        });
        mixed.chain(pure).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_csv_rows(&dir.join(SUMMARY_FILE), &self.summary())?;
        for (label, r) in &self.mixed {
            let path = dir.join(trials_file(label));
            write_records(&r.trials, create(&path)?).with_context(|| path.display().to_string())?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n_support: usize,
    pub grid: usize,
    pub iterations: usize,
    pub solver_loss: f64,
    pub value_lower: f64,
    pub value_upper: f64,
    /// `(upper − lower) / |midpoint|`.
    pub duality_gap: f64,
    /// Distance from the solver loss to the bracket, over `|midpoint|`.
    pub relative_gap: f64,
}

pub fn relative_to_bracket(x: f64, lower: f64, upper: f64) -> f64 {
    let scale = (0.5 * (lower + upper)).abs().max(f64::MIN_POSITIVE);
    (lower - x).max(x - upper).max(0.0) / scale
}

/// Algorithm loss against the fictitious-play bracket on a uniform grid.
pub fn run_oracle(
    e: &PayoffCurve,
    gamma: &PayoffCurve,
    n_poison: u32,
    n_support: usize,
    grid: usize,
    iterations: usize,
    opts: SolveOptions,
) -> Result<(OracleReport, SolveReport)> {
    let report = solve(e, gamma, n_support, n_poison, opts)?;
    let m = build_matrix(e, gamma, n_poison, &uniform_grid(grid))?;
    let fp = solve_matrix_game(&m, iterations)?;
    let scale = fp.midpoint().abs().max(f64::MIN_POSITIVE);
    Ok((
        OracleReport {
            n_support,
            grid,
            iterations,
            solver_loss: report.defender_loss,
            value_lower: fp.value_lower,
            value_upper: fp.value_upper,
            duality_gap: fp.gap() / scale,
            relative_gap: relative_to_bracket(report.defender_loss, fp.value_lower, fp.value_upper),
        },
        report,
    ))
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = create(path)?;
    write_sweep(rows, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LossRow {
    pub n_support: usize,
    pub loss: f64,
    pub converged: bool,
}

/// Settings for the full pipeline.
#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub data: DataOptions,
    pub grid: usize,
    pub sweep_trials: usize,
    pub curve_trials: usize,
    pub eval_trials: usize,
    /// Largest support size solved; sizes 2 and 3 are also evaluated on data,
    /// and the largest is checked against the oracle.
    pub max_support: usize,
    pub solve: SolveOptions,
    pub oracle_grid: usize,
    pub oracle_iterations: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            data: DataOptions::default(),
            grid: 21,
            sweep_trials: 1,
            curve_trials: 3,
            eval_trials: 20,
            max_support: 5,
            solve: SolveOptions::default(),
            oracle_grid: 200,
            oracle_iterations: 200_000,
        }
    }
}

/// Everything the pipeline computed, also written under the output directory.
pub struct PipelineOutput {
    pub experiment: Experiment,
    pub sweep: Vec<SweepRow>,
    pub curves: Curves,
    pub pure_ne: bool,
    pub reports: Vec<(usize, SolveReport)>,
    pub oracle: OracleReport,
    pub evaluation: Evaluation,
}

/// Sweep, curves, solve for each support size, oracle check, evaluation.
pub fn run_pipeline(opts: &PipelineOptions, out: &Path) -> Result<PipelineOutput> {
    if opts.max_support < 2 {
        bail!("max support {} must be at least 2", opts.max_support);
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let exp = Experiment::load(&opts.data)?;

    let sweep = exp.sweep(opts.grid, opts.sweep_trials)?;
    save_sweep(&out.join(SWEEP_FILE), &sweep)?;

    let curves = exp.curves(opts.grid, opts.curve_trials)?;
    curves.save(out)?;
    let (e, g) = (&curves.effect.curve, &curves.gamma.curve);
    let pure_ne = find_pure_ne(e, g, exp.n_poison, &uniform_grid(opts.oracle_grid))?.is_some();

    let mut reports = Vec::new();
    for n in 2..=opts.max_support {
        let r = solve(e, g, n, exp.n_poison, opts.solve)?;
        r.save(out.join(solve_file(n)))?;
        reports.push((n, r));
    }
    let losses: Vec<LossRow> = reports
        .iter()
        .map(|(n, r)| LossRow {
            n_support: *n,
            loss: r.defender_loss,
            converged: r.converged,
        })
        .collect();
    write_csv_rows(&out.join(LOSSES_FILE), &losses)?;

    let (oracle, _) = run_oracle(
        e,
        g,
        exp.n_poison,
        opts.max_support,
        opts.oracle_grid,
        opts.oracle_iterations,
        opts.solve,
    )?;
    save_json(&out.join(ORACLE_FILE), &oracle)?;

    let labeled: Vec<(String, SolveReport)> = reports
        .iter()
        .filter(|(n, _)| *n <= 3)
        .map(|(n, r)| (format!("mixed_n{n}"), r.clone()))
        .collect();
    let evaluation = exp.evaluate(&labeled, opts.grid, opts.eval_trials)?;
    evaluation.save(out)?;

    Ok(PipelineOutput {
        experiment: exp,
        sweep,
        curves,
        pure_ne,
        reports,
        oracle,
        evaluation,
    })
}

/// One-line description of a solve report.
pub fn describe(report: &SolveReport) -> String {
    let support: Vec<String> = report
        .mix
        .support()
        .iter()
        .map(|(r, p)| format!("{r:.4}@{p:.4}"))
        .collect();
    format!(
        "loss {:.6} support [{}] iterations {}{}",
        report.defender_loss,
        support.join(", "),
        report.iterations,
        if report.converged {
            ""
        } else {
            " (not converged)"
        }
    )
}

/// `T_a` of an effect curve, for reporting.
pub fn threshold(e: &PayoffCurve) -> f64 {
    attacker_benefit_threshold(e)
}
