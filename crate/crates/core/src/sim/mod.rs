//! Poisoning experiments on a distance-filtered linear SVM.

pub mod attack;
pub mod dataset;
pub mod geometry;
pub mod scenario;
pub mod svm;

pub use attack::{craft_attack, craft_points, DEFAULT_SPREAD};
pub use dataset::{load_csv, normalize_and_split, Class, LabeledDataset, NormStats, Origin};
pub use geometry::{filter, ClassGeometry, GeometryMode};
pub use scenario::{evaluate_scenario, Defense, ScenarioConfig, ScenarioResult, TrialRecord};
pub use svm::{train_svm, SvmModel, TrainerConfig};

/// Mixes `seed` with `tags` into an independent seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    tags.iter().fold(mix(seed), |acc, &t| mix(acc ^ mix(t)))
}
