//! Score vectors, labeled training banks and feasible fusion weights.

use serde::Serialize;

use crate::error::{FusionError, Result};
use crate::scalar::{dot, l2_norm, Scalar};

/// The outputs of the `m` fused classifiers for a single instance.
///
/// Scores are arbitrary finite reals; only their order within a classifier
/// matters to the fusion math.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreVector<T> {
    id: String,
    values: Vec<T>,
}

impl<T: Scalar> ScoreVector<T> {
    pub fn new(id: impl Into<String>, values: Vec<T>) -> Result<Self> {
        let id = id.into();
        if values.is_empty() {
            return Err(FusionError::EmptyVector);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(FusionError::NonFinite { id, index });
        }
        Ok(Self { id, values })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Plain average of all classifier scores (the average-fusion baseline).
    pub fn mean(&self) -> T {
        let sum = self.values.iter().fold(T::zero(), |acc, &v| acc + v);
        sum / T::from_count(self.values.len())
    }

    /// Copy of this vector with new values, keeping the identifier.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(FusionError::DimensionMismatch {
                expected: self.values.len(),
                found: values.len(),
            });
        }
        Self::new(self.id.clone(), values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

impl From<bool> for Label {
    fn from(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = FusionError;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(FusionError::InvalidParameter(format!(
                "label must be 0 or 1, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledInstance<T> {
    pub scores: ScoreVector<T>,
    pub label: Label,
}

impl<T> LabeledInstance<T> {
    pub fn new(scores: ScoreVector<T>, label: Label) -> Self {
        Self { scores, label }
    }
}

/// Labeled score vectors split by class. Read-only once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingBank<T> {
    positives: Vec<ScoreVector<T>>,
    negatives: Vec<ScoreVector<T>>,
    dim: usize,
}

impl<T: Scalar> TrainingBank<T> {
    pub fn new(positives: Vec<ScoreVector<T>>, negatives: Vec<ScoreVector<T>>) -> Result<Self> {
        if positives.is_empty() {
            return Err(FusionError::EmptyClass("positive"));
        }
        if negatives.is_empty() {
            return Err(FusionError::EmptyClass("negative"));
        }
        let dim = positives[0].dim();
        ensure_uniform_dim(positives.iter().chain(&negatives), dim)?;
        Ok(Self {
            positives,
            negatives,
            dim,
        })
    }

    pub fn positives(&self) -> &[ScoreVector<T>] {
        &self.positives
    }

    pub fn negatives(&self) -> &[ScoreVector<T>] {
        &self.negatives
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fails unless `x` has the bank's dimensionality.
    pub fn check_dim(&self, x: &ScoreVector<T>) -> Result<()> {
        check_len(self.dim, x.dim())
    }
}

/// Partitions labeled instances into a [`TrainingBank`], preserving order
/// within each class.
pub fn build_bank<T: Scalar>(instances: &[LabeledInstance<T>]) -> Result<TrainingBank<T>> {
    let (pos, neg): (Vec<_>, Vec<_>) = instances.iter().partition(|i| i.label.is_positive());
    TrainingBank::new(
        pos.into_iter().map(|i| i.scores.clone()).collect(),
        neg.into_iter().map(|i| i.scores.clone()).collect(),
    )
}

pub(crate) fn ensure_uniform_dim<'a, T: Scalar>(
    vectors: impl IntoIterator<Item = &'a ScoreVector<T>>,
    dim: usize,
) -> Result<()> {
    vectors
        .into_iter()
        .try_for_each(|v| check_len(dim, v.dim()))
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(FusionError::DimensionMismatch { expected, found })
    }
}

/// A feasible fusion weight: nonnegative entries with unit L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> WeightVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(FusionError::EmptyVector);
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(FusionError::InvalidWeights(
                "entries must be finite and nonnegative".into(),
            ));
        }
        let norm = l2_norm(&values);
        if (norm - T::one()).abs() > T::norm_tolerance() {
            return Err(FusionError::InvalidWeights(format!(
                "L2 norm is {norm}, expected 1"
            )));
        }
        Ok(Self { values })
    }

    /// `[1/sqrt(m), ..., 1/sqrt(m)]`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(FusionError::EmptyVector);
        }
        let v = T::one() / T::from_count(m).sqrt();
        Ok(Self { values: vec![v; m] })
    }

    /// Caller guarantees feasibility.
    pub(crate) fn from_feasible(values: Vec<T>) -> Self {
        debug_assert!(values.iter().all(|v| *v >= T::zero()));
        Self { values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Weighted late-fusion score `w . x`.
pub fn fused_score<T: Scalar>(w: &WeightVector<T>, x: &ScoreVector<T>) -> Result<T> {
    check_len(w.dim(), x.dim())?;
    Ok(dot(w.values(), x.values()))
}
