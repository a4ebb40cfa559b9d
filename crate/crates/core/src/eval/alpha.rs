use serde::Serialize;

use crate::clarity::Sharpness;
use crate::data::{LabeledInstance, TrainingBank};
use crate::error::{FusionError, Result};
use crate::optimizer::OptimizerConfig;
use crate::scalar::Scalar;

use super::experiment::{evaluate_mode, learn_all, FusionMode};

pub const DEFAULT_ALPHA_GRID: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AlphaCriterion {
    WeightedScore,
    RawClarity,
}

impl From<AlphaCriterion> for FusionMode {
    fn from(c: AlphaCriterion) -> Self {
        match c {
            AlphaCriterion::WeightedScore => FusionMode::WeightedScore,
            AlphaCriterion::RawClarity => FusionMode::RawClarity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSelection<T> {
    pub alpha: T,
    pub average_precision: T,
    /// `(alpha, AP)` for every grid entry, in grid order.
    pub table: Vec<(T, T)>,
}

/// Picks the sharpness with the best validation AP. Validation labels are
/// used only for scoring, never during weight learning. Equal APs resolve to
/// the smallest `alpha`.
pub fn select_alpha<T: Scalar>(
    grid: &[T],
    validation: &[LabeledInstance<T>],
    bank: &TrainingBank<T>,
    template: &OptimizerConfig<T>,
    criterion: AlphaCriterion,
) -> Result<AlphaSelection<T>> {
    if grid.is_empty() {
        return Err(FusionError::Empty("alpha grid"));
    }
    let has = |pos: bool| validation.iter().any(|v| v.label.is_positive() == pos);
    if !has(true) {
        return Err(FusionError::EmptyClass("positive validation"));
    }
    if !has(false) {
        return Err(FusionError::EmptyClass("negative validation"));
    }
    let xs: Vec<_> = validation.iter().map(|v| v.scores.clone()).collect();

    let mut table = Vec::with_capacity(grid.len());
    for &a in grid {
        let cfg = template.with_alpha(Sharpness::new(a)?);
        let solutions = learn_all(&xs, bank, &cfg)?;
        let report = evaluate_mode(validation, &solutions, criterion.into(), false)?;
        table.push((a, report.average_precision));
    }

    let &(alpha, average_precision) = table
        .iter()
        .reduce(|best, cand| {
            if cand.1 > best.1 || (cand.1 == best.1 && cand.0 < best.0) {
                cand
            } else {
                best
            }
        })
        .expect("non-empty grid");
    Ok(AlphaSelection {
        alpha,
        average_precision,
        table,
    })
}
