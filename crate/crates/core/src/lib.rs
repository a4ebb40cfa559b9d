//! Unsupervised, instance-specific fusion of black-box classifier scores.
//!
//! For every unlabeled instance a nonnegative unit-norm weight vector over
//! the classifiers is learned by pushing a sigmoid-smoothed *raw clarity*
//! index (relevance loss minus irrelevance loss against a labeled bank of
//! training scores) towards whichever extreme it reaches more strongly.
//! The learned weights, or the optimal raw clarity itself, then rank the
//! test set; the largest weights also pick an N-best classifier subset.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`). The
//! `*64` / `*32` aliases below fix the precision for callers that do not
//! care.

pub mod clarity;
pub mod data;
pub mod error;
pub mod eval;
pub mod optimizer;
pub mod ranking;
mod scalar;

pub use clarity::{
    clarity_exact, indicator, irrelevance_exact, irrelevance_smooth, rcl_gradient, rcl_smooth,
    relevance_exact, relevance_smooth, sigmoid, ClarityObjective, Sharpness,
};
pub use data::{build_bank, fused_score, Label, LabeledInstance, ScoreVector, TrainingBank, WeightVector};
pub use error::{FusionError, Result};
pub use optimizer::{
    ascend, descend, learn_batch, learn_weights, project_feasible, BranchResult, ClaritySolution,
    Direction, Init, OptimizerConfig, Projection,
};
pub use ranking::{
    nbest_average_score, nbest_weighted_score, rank_by_average, rank_by_raw_clarity,
    rank_by_weighted_score, select_n_best, NBestSelection, RankCriterion, RankedEntry, RankedList,
};
pub use scalar::Scalar;

pub type ScoreVector64 = ScoreVector<f64>;
pub type TrainingBank64 = TrainingBank<f64>;
pub type WeightVector64 = WeightVector<f64>;
pub type LabeledInstance64 = LabeledInstance<f64>;
pub type ClaritySolution64 = ClaritySolution<f64>;
pub type OptimizerConfig64 = OptimizerConfig<f64>;
pub type RankedList64 = RankedList<f64>;
pub type Sharpness64 = Sharpness<f64>;

pub type ScoreVector32 = ScoreVector<f32>;
pub type TrainingBank32 = TrainingBank<f32>;
pub type WeightVector32 = WeightVector<f32>;
pub type ClaritySolution32 = ClaritySolution<f32>;
pub type OptimizerConfig32 = OptimizerConfig<f32>;
