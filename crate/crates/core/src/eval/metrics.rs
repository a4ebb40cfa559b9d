use crate::error::{FusionError, Result};
use crate::scalar::Scalar;

/// Average precision of a ranked list of binary relevance labels:
/// the mean, over positive positions `i`, of the precision of the top `i`.
pub fn average_precision<T: Scalar>(ranked_labels: &[bool]) -> Result<T> {
    let mut hits = 0usize;
    let mut sum = T::zero();
    for (i, &positive) in ranked_labels.iter().enumerate() {
        if positive {
            hits += 1;
            sum = sum + T::from_count(hits) / T::from_count(i + 1);
        }
    }
    if hits == 0 {
        return Err(FusionError::NoPositives);
    }
    Ok(sum / T::from_count(hits))
}

pub fn mean_average_precision<T: Scalar>(per_class: &[T]) -> Result<T> {
    if per_class.is_empty() {
        return Err(FusionError::Empty("per-class AP list"));
    }
    let sum = per_class.iter().fold(T::zero(), |acc, &v| acc + v);
    Ok(sum / T::from_count(per_class.len()))
}
