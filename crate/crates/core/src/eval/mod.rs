//! Evaluation harness: average precision, sharpness selection, score
//! corruption, synthetic score generation and end-to-end experiments.

mod alpha;
mod corrupt;
mod experiment;
mod metrics;
mod synth;

pub use alpha::{select_alpha, AlphaCriterion, AlphaSelection, DEFAULT_ALPHA_GRID};
pub use corrupt::{corrupt_labeled, corrupt_scores, CorruptionSpec};
pub use experiment::{
    evaluate_mode, learn_all, rank_instances, run_experiment, ExperimentReport, FusionMode,
    InstanceDiagnostic,
};
pub use metrics::{average_precision, mean_average_precision};
pub use synth::{generate_synthetic, ClassProfile, SynthSpec};
