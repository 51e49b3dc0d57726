//! Fault-detection benchmarking for tabular manufacturing-sensor data.
//!
//! The pipeline profiles and cleans part records, injects artificial
//! defective parts, trains eight classifiers behind one contract, distils
//! tree models into readable defect rules and tabulates a comparison of
//! processing time, accuracy, unused fields and AUC.
//!
//! Probabilities follow one orientation everywhere: 1 means the part is
//! normal, 0 means it is defective. This is the reverse of the common
//! "positive = fault" convention.

pub mod classifiers;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod faultgen;
pub mod preprocess;
pub mod rules;

pub use classifiers::{predict_label, predict_proba, train, ModelKind, TrainConfig, TrainedModel};
pub use dataset::{generate_reference, Class, Dataset, FieldSpec, Record, Schema};
pub use error::{Error, Result};
pub use evaluate::{compare, evaluate_model, roc_auc, ComparisonReport, EvalResult, SplitPlan};
pub use faultgen::{inject_faults, InjectionMode, InjectionSpec};
pub use preprocess::{OutlierMethod, PreprocessPlan};
pub use rules::{apply_rules, extract_rules, simplify, RuleSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The one RNG constructor; all randomness in the crate flows through it.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
