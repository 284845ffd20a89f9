use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use poisongame::sim::{GeometryMode, TrainerConfig};
use poisongame::{solve, SolveOptions, SolveReport};
use poisongame_cli::{
    describe, load_curves, run_oracle, run_pipeline, save_json, save_sweep, solve_file, threshold,
    DataOptions, Experiment, PipelineOptions, FAST_EPOCHS, ORACLE_FILE, SWEEP_FILE,
};

/// Game-theoretic filtering defense against data poisoning.
#[derive(Parser)]
#[command(name = "poisongame", version)]
struct Cli {
    /// Worker threads for trials and sweep cells (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Accuracy with and without the optimal attack across filter strengths.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Estimate the attack-effect and removal-cost curves.
    Curves {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compute the defender's mixed strategy from curve files.
    Solve {
        #[command(flatten)]
        curves: CurveArgs,
        #[arg(long, default_value_t = 3)]
        n_support: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check the solver against fictitious play on the discretized game.
    Oracle {
        #[command(flatten)]
        curves: CurveArgs,
        #[arg(long, default_value_t = 3)]
        n_support: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// Points on the shared attacker/defender grid.
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long, default_value_t = 200_000)]
        iterations: usize,
        /// Largest tolerated relative distance from the value bracket.
        #[arg(long, default_value_t = 0.02)]
        gap_threshold: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate solved mixed defenses and every pure defense under attack.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Solve report(s); each is labeled by its file stem.
        #[arg(long = "report", required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run every stage and write all outputs.
    Pipeline {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 21)]
        grid: usize,
        /// Trials per evaluation scenario.
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        sweep_trials: usize,
        #[arg(long, default_value_t = 3)]
        curve_trials: usize,
        /// Largest support size to solve.
        #[arg(long, default_value_t = 5)]
        n_support: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 200)]
        oracle_grid: usize,
        #[arg(long, default_value_t = 200_000)]
        iterations: usize,
        /// Fail when the largest support's loss is further than this from
        /// the oracle bracket (relative); unchecked by default.
        #[arg(long)]
        gap_threshold: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Geometry {
    /// Defender geometry fit on the clean training split.
    Clean,
    /// Defender geometry refit on the poisoned training set.
    Blind,
}

#[derive(Args)]
struct DataArgs {
    /// Comma-separated data, last column the 0/1 class, no header.
    #[arg(long, env = "SPAMBASE_DATA", default_value = "data/spambase_keel.data")]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Poisoning budget as a fraction of the training set.
    #[arg(long, default_value_t = 0.2)]
    budget: f64,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long, conflicts_with = "fast")]
    epochs: Option<usize>,
    /// Train for 500 epochs instead of 5000.
    #[arg(long)]
    fast: bool,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1e-4)]
    regularization: f64,
    /// Weight of the random tangent in the attack direction.
    #[arg(long, default_value_t = poisongame::sim::DEFAULT_SPREAD)]
    spread: f64,
    #[arg(long, value_enum, default_value_t = Geometry::Clean)]
    geometry: Geometry,
}

impl DataArgs {
    fn options(&self) -> DataOptions {
        let epochs = match (self.epochs, self.fast) {
            (Some(e), _) => e,
            (None, true) => FAST_EPOCHS,
            (None, false) => TrainerConfig::default().epochs,
        };
        DataOptions {
            data: self.data.clone(),
            seed: self.seed,
            train_fraction: self.train_fraction,
            budget: self.budget,
            trainer: TrainerConfig {
                epochs,
                learning_rate: self.learning_rate,
                regularization: self.regularization,
                seed: 0,
            },
            spread: self.spread,
            geometry: match self.geometry {
                Geometry::Clean => GeometryMode::Clean,
                Geometry::Blind => GeometryMode::Blind,
            },
        }
    }
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long, default_value = "out/effect.csv")]
    effect: PathBuf,
    #[arg(long, default_value = "out/gamma.csv")]
    gamma: PathBuf,
    /// Number of poisoning points.
    #[arg(long, default_value_t = 644)]
    budget: u32,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = SolveOptions::default().epsilon)]
    epsilon: f64,
    #[arg(long, default_value_t = SolveOptions::default().step)]
    step: f64,
    #[arg(long, default_value_t = SolveOptions::default().max_iter)]
    max_iter: usize,
}

impl SolverArgs {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            epsilon: self.epsilon,
            step: self.step,
            max_iter: self.max_iter,
        }
    }
}

fn out_dir(out: &Path) -> Result<&Path> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Sweep {
            data,
            grid,
            trials,
            out,
        } => {
            let exp = Experiment::load(&data.options())?;
            let rows = exp.sweep(grid, trials)?;
            let path = out_dir(&out)?.join(SWEEP_FILE);
            save_sweep(&path, &rows)?;
            for r in &rows {
                println!(
                    "{:.2}  clean {:.4}  attacked {:.4}",
                    r.removal_fraction, r.accuracy_clean, r.accuracy_attacked
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Curves {
            data,
            grid,
            trials,
            out,
        } => {
            let exp = Experiment::load(&data.options())?;
            let curves = exp.curves(grid, trials)?;
            curves.save(out_dir(&out)?)?;
            println!(
                "budget {} points, T_a {:.4}; wrote curves to {}",
                exp.n_poison,
                threshold(&curves.effect.curve),
                out.display()
            );
        }
        Command::Solve {
            curves,
            n_support,
            solver,
            out,
        } => {
            let (e, g) = load_curves(&curves.effect, &curves.gamma)?;
            let report = solve(&e, &g, n_support, curves.budget, solver.options())?;
            let path = out_dir(&out)?.join(solve_file(n_support));
            report.save(&path)?;
            println!("{}", describe(&report));
            println!("wrote {}", path.display());
        }
        Command::Oracle {
            curves,
            n_support,
            solver,
            grid,
            iterations,
            gap_threshold,
            out,
        } => {
            let (e, g) = load_curves(&curves.effect, &curves.gamma)?;
            let (report, _) = run_oracle(
                &e,
                &g,
                curves.budget,
                n_support,
                grid,
                iterations,
                solver.options(),
            )?;
            save_json(&out_dir(&out)?.join(ORACLE_FILE), &report)?;
            print_oracle(&report);
            check_gap(report.relative_gap, gap_threshold)?;
        }
        Command::Evaluate {
            data,
            reports,
            grid,
            trials,
            out,
        } => {
            let exp = Experiment::load(&data.options())?;
            let labeled = reports
                .iter()
                .map(|p| {
                    let label = p.file_stem().map(|s| s.to_string_lossy().into_owned());
                    Ok((
                        label.unwrap_or_else(|| "mixed".into()),
                        SolveReport::load(p)?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let ev = exp.evaluate(&labeled, grid, trials)?;
            ev.save(out_dir(&out)?)?;
            for row in ev.summary() {
                match row.theta {
                    Some(t) => println!("pure θ={t:.2}  {:.4}", row.accuracy),
                    None => println!("{}  {:.4}", row.defense, row.accuracy),
                }
            }
        }
        Command::Pipeline {
            data,
            grid,
            trials,
            sweep_trials,
            curve_trials,
            n_support,
            solver,
            oracle_grid,
            iterations,
            gap_threshold,
            out,
        } => {
            let opts = PipelineOptions {
                data: data.options(),
                grid,
                sweep_trials,
                curve_trials,
                eval_trials: trials,
                max_support: n_support,
                solve: solver.options(),
                oracle_grid,
                oracle_iterations: iterations,
            };
            let res = run_pipeline(&opts, &out)?;
            println!(
                "budget {} points, pure NE found: {}",
                res.experiment.n_poison, res.pure_ne
            );
            for (n, r) in &res.reports {
                println!("n={n}: {}", describe(r));
            }
            print_oracle(&res.oracle);
            if let Some((t, acc)) = res.evaluation.best_pure() {
                println!("best pure θ={t:.2}  {acc:.4}");
            }
            for (label, r) in &res.evaluation.mixed {
                println!("{label}  {:.4}", r.mean_accuracy);
            }
            println!("wrote outputs to {}", out.display());
            if let Some(t) = gap_threshold {
                check_gap(res.oracle.relative_gap, t)?;
            }
        }
    }
    Ok(())
}

fn print_oracle(r: &poisongame_cli::OracleReport) {
    println!(
        "solver loss {:.6}  oracle [{:.6}, {:.6}]  duality gap {:.3}%  relative gap {:.3}%",
        r.solver_loss,
        r.value_lower,
        r.value_upper,
        100.0 * r.duality_gap,
        100.0 * r.relative_gap
    );
}

fn check_gap(gap: f64, threshold: f64) -> Result<()> {
    if gap > threshold {
        bail!("relative gap {gap:.4} exceeds threshold {threshold}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
