use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::data::{LabeledInstance, ScoreVector};
use crate::error::{FusionError, Result};
use crate::scalar::Scalar;

/// Gaussian degradation of selected classifiers on a random subset of rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorruptionSpec {
    pub classifier_indices: Vec<usize>,
    /// Fraction of rows corrupted per classifier.
    pub fraction: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(classifier_indices: Vec<usize>, sigma: f64, seed: u64) -> Self {
        Self {
            classifier_indices,
            fraction: 0.2,
            sigma,
            seed,
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(FusionError::InvalidParameter(format!(
                "fraction must be in [0, 1], got {}",
                self.fraction
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(FusionError::InvalidParameter(format!(
                "sigma must be finite and nonnegative, got {}",
                self.sigma
            )));
        }
        for (k, &index) in self.classifier_indices.iter().enumerate() {
            if index >= m {
                return Err(FusionError::IndexOutOfRange { index, len: m });
            }
            if self.classifier_indices[..k].contains(&index) {
                return Err(FusionError::InvalidParameter(format!(
                    "classifier {index} listed twice"
                )));
            }
        }
        Ok(())
    }

    /// Number of rows corrupted per classifier for a table of `rows` rows.
    pub fn rows_per_classifier(&self, rows: usize) -> usize {
        (self.fraction * rows as f64).round() as usize
    }
}

/// Adds `N(0, sigma)` noise to each listed classifier's score on an
/// independently drawn subset of `round(fraction * rows)` rows.
///
/// Row subsets come from one ChaCha stream and noise from another, so the
/// choice of rows does not depend on how normals are sampled.
pub fn corrupt_scores<T: Scalar>(
    test: &[ScoreVector<T>],
    spec: &CorruptionSpec,
) -> Result<Vec<ScoreVector<T>>> {
    let Some(first) = test.first() else {
        return Ok(Vec::new());
    };
    let m = first.dim();
    crate::data::ensure_uniform_dim(test, m)?;
    spec.validate(m)?;

    let mut rows: Vec<Vec<T>> = test.iter().map(|x| x.values().to_vec()).collect();
    if spec.sigma > 0.0 {
        let mut pick = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
        noise_rng.set_stream(1);
        let noise = Normal::new(0.0, spec.sigma)
            .map_err(|e| FusionError::InvalidParameter(e.to_string()))?;
        let k = spec.rows_per_classifier(test.len());
        for &c in &spec.classifier_indices {
            let mut chosen = sample(&mut pick, test.len(), k).into_vec();
            chosen.sort_unstable();
            for r in chosen {
                rows[r][c] = rows[r][c] + T::lit(noise.sample(&mut noise_rng));
            }
        }
    }
    test.iter()
        .zip(rows)
        .map(|(x, v)| x.with_values(v))
        .collect()
}

/// [`corrupt_scores`] over labeled rows; labels are untouched.
pub fn corrupt_labeled<T: Scalar>(
    data: &[LabeledInstance<T>],
    spec: &CorruptionSpec,
) -> Result<Vec<LabeledInstance<T>>> {
    let scores: Vec<_> = data.iter().map(|d| d.scores.clone()).collect();
    Ok(corrupt_scores(&scores, spec)?
        .into_iter()
        .zip(data)
        .map(|(s, d)| LabeledInstance::new(s, d.label))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: usize, m: usize) -> Vec<ScoreVector<f64>> {
        (0..rows)
            .map(|i| {
                let v = (0..m).map(|c| ((i * 7 + c * 3) % 11) as f64 / 10.0).collect();
                ScoreVector::new(format!("r{i}"), v).unwrap()
            })
            .collect()
    }

    fn changed(a: &[ScoreVector<f64>], b: &[ScoreVector<f64>], col: usize) -> Vec<usize> {
        a.iter()
            .zip(b)
            .enumerate()
            .filter(|(_, (x, y))| x.values()[col].to_bits() != y.values()[col].to_bits())
            .map(|(i, _)| i)
            .collect()
    }

    #[test]
    fn zero_fraction_or_sigma_is_identity() {
        let t = table(30, 3);
        let mut spec = CorruptionSpec::new(vec![0, 2], 1.0, 9);
        spec.fraction = 0.0;
        assert_eq!(corrupt_scores(&t, &spec).unwrap(), t);
        let spec = CorruptionSpec::new(vec![0, 2], 0.0, 9);
        assert_eq!(corrupt_scores(&t, &spec).unwrap(), t);
    }

    #[test]
    fn exact_row_count_in_one_column() {
        let t = table(100, 4);
        let out = corrupt_scores(&t, &CorruptionSpec::new(vec![2], 1.0, 3)).unwrap();
        assert_eq!(changed(&t, &out, 2).len(), 20);
        for c in [0, 1, 3] {
            assert!(changed(&t, &out, c).is_empty());
        }
        for (a, b) in t.iter().zip(&out) {
            assert_eq!(a.id(), b.id());
        }
    }

    #[test]
    fn columns_are_corrupted_independently() {
        let t = table(100, 3);
        let out = corrupt_scores(&t, &CorruptionSpec::new(vec![0, 2], 1.0, 11)).unwrap();
        let (c0, c2) = (changed(&t, &out, 0), changed(&t, &out, 2));
        assert_eq!((c0.len(), c2.len()), (20, 20));
        assert_ne!(c0, c2);
        assert!(changed(&t, &out, 1).is_empty());
    }

    #[test]
    fn seeds_control_the_pattern() {
        let t = table(50, 2);
        let a = corrupt_scores(&t, &CorruptionSpec::new(vec![1], 0.5, 1)).unwrap();
        let b = corrupt_scores(&t, &CorruptionSpec::new(vec![1], 0.5, 1)).unwrap();
        let c = corrupt_scores(&t, &CorruptionSpec::new(vec![1], 0.5, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(changed(&t, &a, 1), changed(&t, &c, 1));
    }

    #[test]
    fn invalid_specs() {
        let t = table(10, 2);
        assert!(matches!(
            corrupt_scores(&t, &CorruptionSpec::new(vec![2], 1.0, 0)),
            Err(FusionError::IndexOutOfRange { index: 2, len: 2 })
        ));
        assert!(corrupt_scores(&t, &CorruptionSpec::new(vec![1, 1], 1.0, 0)).is_err());
        assert!(corrupt_scores(&t, &CorruptionSpec::new(vec![0], -1.0, 0)).is_err());
        let mut spec = CorruptionSpec::new(vec![0], 1.0, 0);
        spec.fraction = 1.5;
        assert!(corrupt_scores(&t, &spec).is_err());
        assert!(corrupt_scores::<f64>(&[], &spec).unwrap().is_empty());
    }
}
