//! Relevance and irrelevance losses, the clarity index, and the
//! sigmoid-smoothed raw clarity that the optimizer works on.
//!
//! Exact losses count training points with the indicator `I(t) = [t >= 0]`.
//! Smoothed losses replace the indicator by `1 / (1 + exp(-alpha * t))`.
//! At an exact tie the indicator gives 1 and the sigmoid gives 1/2, so the
//! two agree in the large-`alpha` limit only away from ties.

use serde::Serialize;

use crate::data::{ScoreVector, TrainingBank, WeightVector};
use crate::error::{FusionError, Result};
use crate::scalar::{dot, Scalar};

/// Sigmoid steepness `alpha`. Strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Sharpness<T>(T);

impl<T: Scalar> Sharpness<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if alpha.is_finite() && alpha > T::zero() {
            Ok(Self(alpha))
        } else {
            Err(FusionError::InvalidParameter(format!(
                "alpha must be positive and finite, got {alpha}"
            )))
        }
    }

    pub fn get(self) -> T {
        self.0
    }
}

/// `1` when `t >= 0`, else `0`.
pub fn indicator<T: Scalar>(t: T) -> T {
    if t >= T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// Logistic function of an already-scaled argument, without overflow for
/// large `|z|`.
#[inline]
pub(crate) fn logistic<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `sigma(z) * (1 - sigma(z))`, computed as `sigma(z) * sigma(-z)`.
#[inline]
fn logistic_slope<T: Scalar>(z: T) -> T {
    logistic(z) * logistic(-z)
}

/// Smooth surrogate of the indicator: `1 / (1 + exp(-alpha * t))`.
pub fn sigmoid<T: Scalar>(t: T, alpha: Sharpness<T>) -> T {
    logistic(alpha.get() * t)
}

fn exact_fraction<T: Scalar>(
    group: &[ScoreVector<T>],
    w: &[T],
    margin: impl Fn(T) -> T,
) -> T {
    let hits = group
        .iter()
        .map(|xi| indicator(margin(dot(w, xi.values()))))
        .fold(T::zero(), |acc, v| acc + v);
    hits / T::from_count(group.len())
}

fn check_inputs<T: Scalar>(
    x_u: &ScoreVector<T>,
    w: &WeightVector<T>,
    bank: &TrainingBank<T>,
) -> Result<()> {
    bank.check_dim(x_u)?;
    crate::data::check_len(bank.dim(), w.dim())
}

/// Fraction of negatives whose fused score is at least the test instance's.
pub fn relevance_exact<T: Scalar>(
    x_u: &ScoreVector<T>,
    w: &WeightVector<T>,
    bank: &TrainingBank<T>,
) -> Result<T> {
    check_inputs(x_u, w, bank)?;
    let s_u = dot(w.values(), x_u.values());
    Ok(exact_fraction(bank.negatives(), w.values(), |s_i| s_i - s_u))
}

/// Fraction of positives whose fused score is at most the test instance's.
pub fn irrelevance_exact<T: Scalar>(
    x_u: &ScoreVector<T>,
    w: &WeightVector<T>,
    bank: &TrainingBank<T>,
) -> Result<T> {
    check_inputs(x_u, w, bank)?;
    let s_u = dot(w.values(), x_u.values());
    Ok(exact_fraction(bank.positives(), w.values(), |s_i| s_u - s_i))
}

/// `|RL - IL|` with exact indicator losses.
pub fn clarity_exact<T: Scalar>(
    x_u: &ScoreVector<T>,
    w: &WeightVector<T>,
    bank: &TrainingBank<T>,
) -> Result<T> {
    let rl = relevance_exact(x_u, w, bank)?;
    let il = irrelevance_exact(x_u, w, bank)?;
    Ok((rl - il).abs())
}

/// Smoothed raw clarity for one test instance, with the `w`-independent
/// difference vectors precomputed.
///
/// Methods take raw weight slices so the objective can be probed off the
/// feasible set (finite differences, unnormalized weights).
#[derive(Debug, Clone)]
pub struct ClarityObjective<T> {
    /// `x_i - x_u` for every negative.
    neg_diffs: Vec<Vec<T>>,
    /// `x_u - x_i` for every positive.
    pos_diffs: Vec<Vec<T>>,
    alpha: T,
    dim: usize,
}

impl<T: Scalar> ClarityObjective<T> {
    pub fn new(x_u: &ScoreVector<T>, bank: &TrainingBank<T>, alpha: Sharpness<T>) -> Result<Self> {
        bank.check_dim(x_u)?;
        let xu = x_u.values();
        let diff = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&p, &q)| p - q).collect::<Vec<_>>();
        Ok(Self {
            neg_diffs: bank.negatives().iter().map(|xi| diff(xi.values(), xu)).collect(),
            pos_diffs: bank.positives().iter().map(|xi| diff(xu, xi.values())).collect(),
            alpha: alpha.get(),
            dim: bank.dim(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    fn mean_sigmoid(&self, diffs: &[Vec<T>], w: &[T]) -> T {
        let sum = diffs
            .iter()
            .fold(T::zero(), |acc, d| acc + logistic(self.alpha * dot(w, d)));
        sum / T::from_count(diffs.len())
    }

    pub fn relevance(&self, w: &[T]) -> T {
        self.mean_sigmoid(&self.neg_diffs, w)
    }

    pub fn irrelevance(&self, w: &[T]) -> T {
        self.mean_sigmoid(&self.pos_diffs, w)
    }

    pub fn rcl(&self, w: &[T]) -> T {
        self.relevance(w) - self.irrelevance(w)
    }

    /// Analytic gradient of [`rcl`](Self::rcl) with respect to `w`:
    /// `(alpha/n0) sum sigma'(alpha w.d_i) d_i - (alpha/n1) sum sigma'(alpha w.e_i) e_i`.
    pub fn gradient(&self, w: &[T]) -> Vec<T> {
        let mut grad = vec![T::zero(); self.dim];
        self.accumulate(&mut grad, &self.neg_diffs, w, T::one());
        self.accumulate(&mut grad, &self.pos_diffs, w, -T::one());
        grad
    }

    fn accumulate(&self, grad: &mut [T], diffs: &[Vec<T>], w: &[T], sign: T) {
        let scale = sign * self.alpha / T::from_count(diffs.len());
        for d in diffs {
            let c = scale * logistic_slope(self.alpha * dot(w, d));
            for (g, &dk) in grad.iter_mut().zip(d) {
                *g = *g + c * dk;
            }
        }
    }
}

pub fn relevance_smooth<T: Scalar>(
    x_u: &ScoreVector<T>,
    w: &WeightVector<T>,
    bank: &TrainingBank<T>,
    alpha: Sharpness<T>,
) -> Result<T> {
    check_inputs(x_u, w, bank)?;
    Ok(ClarityObjective::new(x_u, bank, alpha)?.relevance(w.values()))
}

pub fn irrelevance_smooth<T: Scalar>(
    x_u: &ScoreVector<T>,
    w: &WeightVector<T>,
    bank: &TrainingBank<T>,
    alpha: Sharpness<T>,
) -> Result<T> {
    check_inputs(x_u, w, bank)?;
    Ok(ClarityObjective::new(x_u, bank, alpha)?.irrelevance(w.values()))
}

/// Smoothed raw clarity `RL - IL`, in `(-1, 1)`.
pub fn rcl_smooth<T: Scalar>(
    x_u: &ScoreVector<T>,
    w: &WeightVector<T>,
    bank: &TrainingBank<T>,
    alpha: Sharpness<T>,
) -> Result<T> {
    check_inputs(x_u, w, bank)?;
    Ok(ClarityObjective::new(x_u, bank, alpha)?.rcl(w.values()))
}

pub fn rcl_gradient<T: Scalar>(
    x_u: &ScoreVector<T>,
    w: &WeightVector<T>,
    bank: &TrainingBank<T>,
    alpha: Sharpness<T>,
) -> Result<Vec<T>> {
    check_inputs(x_u, w, bank)?;
    Ok(ClarityObjective::new(x_u, bank, alpha)?.gradient(w.values()))
}
