use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::data::{Label, LabeledInstance, ScoreVector, TrainingBank};
use crate::error::{FusionError, Result};
use crate::scalar::Scalar;

/// Class-conditional Gaussian score model for one classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassProfile {
    pub pos_mean: f64,
    pub pos_std: f64,
    pub neg_mean: f64,
    pub neg_std: f64,
}

impl ClassProfile {
    pub fn new(pos_mean: f64, neg_mean: f64, std: f64) -> Self {
        Self {
            pos_mean,
            pos_std: std,
            neg_mean,
            neg_std: std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSpec {
    /// One profile per classifier; its length is `m`.
    pub classifiers: Vec<ClassProfile>,
    pub n_train_pos: usize,
    pub n_train_neg: usize,
    pub n_test: usize,
    /// Share of test rows drawn from the positive class (rounded).
    pub test_positive_fraction: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// `m` identical classifiers.
    pub fn homogeneous(m: usize, profile: ClassProfile, n_train: usize, n_test: usize, seed: u64) -> Self {
        Self {
            classifiers: vec![profile; m],
            n_train_pos: n_train,
            n_train_neg: n_train,
            n_test,
            test_positive_fraction: 0.5,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FusionError::InvalidParameter(msg));
        if self.classifiers.is_empty() {
            return bad("at least one classifier is required".into());
        }
        if self.n_train_pos == 0 || self.n_train_neg == 0 || self.n_test == 0 {
            return bad("all instance counts must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.test_positive_fraction) {
            return bad("test positive fraction must be in [0, 1]".into());
        }
        for (i, p) in self.classifiers.iter().enumerate() {
            let params = [p.pos_mean, p.pos_std, p.neg_mean, p.neg_std];
            if params.iter().any(|v| !v.is_finite()) || p.pos_std < 0.0 || p.neg_std < 0.0 {
                return bad(format!("classifier {i}: means must be finite and stds nonnegative"));
            }
        }
        Ok(())
    }

    pub fn n_test_positive(&self) -> usize {
        (self.test_positive_fraction * self.n_test as f64).round() as usize
    }
}

struct Sampler {
    pos: Vec<Normal<f64>>,
    neg: Vec<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl Sampler {
    fn draw<T: Scalar>(&mut self, id: String, label: Label) -> Result<LabeledInstance<T>> {
        let dists = if label.is_positive() { &self.pos } else { &self.neg };
        let values = dists.iter().map(|d| T::lit(d.sample(&mut self.rng))).collect();
        Ok(LabeledInstance::new(ScoreVector::new(id, values)?, label))
    }
}

/// Draws a training bank and a shuffled, labeled test set from `spec`'s
/// class-conditional Gaussians. Deterministic in `seed`.
pub fn generate_synthetic<T: Scalar>(
    spec: &SynthSpec,
) -> Result<(TrainingBank<T>, Vec<LabeledInstance<T>>)> {
    spec.validate()?;
    let normal = |mean: f64, std: f64| {
        Normal::new(mean, std).map_err(|e| FusionError::InvalidParameter(e.to_string()))
    };
    let mut sampler = Sampler {
        pos: spec.classifiers.iter().map(|p| normal(p.pos_mean, p.pos_std)).collect::<Result<_>>()?,
        neg: spec.classifiers.iter().map(|p| normal(p.neg_mean, p.neg_std)).collect::<Result<_>>()?,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
    };

    let positives = (0..spec.n_train_pos)
        .map(|i| Ok(sampler.draw::<T>(format!("p{i:04}"), Label::Positive)?.scores))
        .collect::<Result<Vec<_>>>()?;
    let negatives = (0..spec.n_train_neg)
        .map(|i| Ok(sampler.draw::<T>(format!("n{i:04}"), Label::Negative)?.scores))
        .collect::<Result<Vec<_>>>()?;
    let bank = TrainingBank::new(positives, negatives)?;

    let n_pos = spec.n_test_positive();
    let mut labels: Vec<Label> = (0..spec.n_test)
        .map(|i| Label::from(i < n_pos))
        .collect();
    labels.shuffle(&mut sampler.rng);
    let test = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| sampler.draw(format!("u{i:04}"), label))
        .collect::<Result<Vec<_>>>()?;
    Ok((bank, test))
}
