//! Mixed-strategy defenses against data poisoning of a distance-filtered
//! linear classifier.
//!
//! The game lives in percentile space: an attacker places poisoning points at
//! distance percentiles of the genuine data around each class centroid, and a
//! defender removes everything beyond a filter radius. [`game`] holds the
//! payoff and best-response math, [`solver`] computes the defender's
//! equilibrium mixture, [`oracle`] cross-checks it on a discretized matrix
//! game, and [`sim`] measures the payoff curves on real data.

pub mod curve;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod game;
pub mod isotonic;
pub mod oracle;
pub mod sim;
pub mod solver;

pub use curve::{uniform_grid, PayoffCurve};
pub use error::{Error, Result};
pub use estimate::{estimate_e, estimate_gamma, CurveEstimate, EstimateContext};
pub use experiment::{optimal_attack_mixed, optimal_attack_pure, Split, SweepRow};
pub use game::{
    attacker_benefit_threshold, best_response_attacker, best_response_defender, defender_utility,
    expected_payoff, find_pure_ne, pure_payoff, AttackPlan, AttackerResponse, DefenseRadius,
    MixedDefense,
};
pub use isotonic::{monotone_fit, Direction};
pub use oracle::{build_matrix, solve_matrix_game, GameMatrix, MatrixSolution};
pub use sim::{
    Class, ClassGeometry, Defense, GeometryMode, LabeledDataset, Origin, ScenarioConfig,
    ScenarioResult, SvmModel, TrainerConfig, TrialRecord,
};
pub use solver::{
    choose_initial_radius, defender_loss, find_percentage, loss_gradient, solve, solve_from,
    SolveOptions, SolveReport,
};
