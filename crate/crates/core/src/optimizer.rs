//! Per-instance weight learning by projected gradient ascent and descent on
//! the smoothed raw clarity.
//!
//! Both branches start from the same feasible point. Each takes steps of
//! size `eta` along the (signed) gradient, projects back onto the
//! nonnegative part of the unit sphere, and only accepts steps that do not
//! worsen the objective in its own direction, halving the step for that
//! iteration when they would. The branch with the larger `|RCL|` wins.

use rayon::prelude::*;
use serde::Serialize;

use crate::clarity::{ClarityObjective, Sharpness};
use crate::data::{check_len, ScoreVector, TrainingBank, WeightVector};
use crate::error::{FusionError, Result};
use crate::scalar::{l2_norm, Scalar};

/// Halvings tried before a branch declares that no improving step exists.
const MAX_BACKTRACKS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Init<T> {
    Uniform,
    Custom(WeightVector<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerConfig<T> {
    pub eta: T,
    pub max_iters: usize,
    /// Stop once `|RCL_k - RCL_{k-1}|` falls below this.
    pub tol: T,
    pub alpha: Sharpness<T>,
    pub init: Init<T>,
}

impl<T: Scalar> OptimizerConfig<T> {
    /// Defaults: `eta = 0.1`, 1000 iterations, `tol = 1e-7`, uniform start.
    pub fn new(alpha: Sharpness<T>) -> Self {
        Self {
            eta: T::lit(0.1),
            max_iters: 1000,
            tol: T::lit(1e-7),
            alpha,
            init: Init::Uniform,
        }
    }

    pub fn with_alpha(&self, alpha: Sharpness<T>) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(FusionError::InvalidParameter(what.to_string()));
        if !(self.eta.is_finite() && self.eta > T::zero()) {
            return bad("eta must be positive");
        }
        if !(self.tol.is_finite() && self.tol > T::zero()) {
            return bad("tol must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        Ok(())
    }

    fn start(&self, m: usize) -> Result<WeightVector<T>> {
        match &self.init {
            Init::Uniform => WeightVector::uniform(m),
            Init::Custom(w) => {
                check_len(m, w.dim())?;
                Ok(project_feasible(w.values()).weights)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    pub weights: WeightVector<T>,
    /// Every entry was nonpositive; the uniform vector was substituted.
    pub degenerate: bool,
}

/// Clamps negative entries to zero and rescales to unit L2 norm.
///
/// An input with no positive entry has no nearest feasible point; the
/// uniform vector is returned and `degenerate` is set.
pub fn project_feasible<T: Scalar>(v: &[T]) -> Projection<T> {
    let clamped: Vec<T> = v.iter().map(|&x| x.max(T::zero())).collect();
    let norm = l2_norm(&clamped);
    if norm > T::zero() && norm.is_finite() {
        Projection {
            weights: WeightVector::from_feasible(clamped.into_iter().map(|x| x / norm).collect()),
            degenerate: false,
        }
    } else {
        Projection {
            weights: WeightVector::uniform(v.len().max(1)).expect("non-empty"),
            degenerate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Maximized,
    Minimized,
}

impl Direction {
    fn sign<T: Scalar>(self) -> T {
        match self {
            Direction::Maximized => T::one(),
            Direction::Minimized => -T::one(),
        }
    }

    fn branch(self) -> &'static str {
        match self {
            Direction::Maximized => "ascent",
            Direction::Minimized => "descent",
        }
    }
}

/// Result of one ascent or descent run.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchResult<T> {
    pub weights: WeightVector<T>,
    pub rcl: T,
    pub iterations: usize,
    /// The projection fell back to the uniform vector at least once.
    pub degenerate_projection: bool,
}

fn run_branch<T: Scalar>(
    objective: &ClarityObjective<T>,
    cfg: &OptimizerConfig<T>,
    direction: Direction,
) -> Result<BranchResult<T>> {
    cfg.validate()?;
    let sign = direction.sign::<T>();
    let mut w = cfg.start(objective.dim())?;
    let mut f = objective.rcl(w.values());
    let mut iterations = 0;
    let mut degenerate_projection = false;

    while iterations < cfg.max_iters {
        let grad = objective.gradient(w.values());
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(FusionError::NonFiniteGradient {
                branch: direction.branch(),
                iteration: iterations + 1,
            });
        }
        if grad.iter().all(|g| g.is_zero()) {
            break;
        }

        let mut step = cfg.eta;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let raw: Vec<T> = w
                .values()
                .iter()
                .zip(&grad)
                .map(|(&wk, &gk)| wk + sign * step * gk)
                .collect();
            let proj = project_feasible(&raw);
            let fc = objective.rcl(proj.weights.values());
            if sign * (fc - f) >= T::zero() {
                accepted = Some((proj, fc));
                break;
            }
            step = step / T::lit(2.0);
        }
        let Some((proj, fc)) = accepted else {
            break;
        };

        iterations += 1;
        degenerate_projection |= proj.degenerate;
        let delta = (fc - f).abs();
        w = proj.weights;
        f = fc;
        if delta < cfg.tol {
            break;
        }
    }

    Ok(BranchResult {
        weights: w,
        rcl: f,
        iterations,
        degenerate_projection,
    })
}

/// Projected gradient ascent on the smoothed raw clarity.
pub fn ascend<T: Scalar>(
    x_u: &ScoreVector<T>,
    bank: &TrainingBank<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<BranchResult<T>> {
    let objective = ClarityObjective::new(x_u, bank, cfg.alpha)?;
    run_branch(&objective, cfg, Direction::Maximized)
}

/// Projected gradient descent on the smoothed raw clarity.
pub fn descend<T: Scalar>(
    x_u: &ScoreVector<T>,
    bank: &TrainingBank<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<BranchResult<T>> {
    let objective = ClarityObjective::new(x_u, bank, cfg.alpha)?;
    run_branch(&objective, cfg, Direction::Minimized)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaritySolution<T> {
    pub weights: WeightVector<T>,
    /// Smoothed raw clarity at `weights`; its magnitude is the clarity.
    pub rcl: T,
    pub direction: Direction,
    /// `(ascent, descent)` accepted iterations.
    pub iterations: (usize, usize),
    pub alpha: T,
    /// Both branches ended on the same side of zero.
    pub same_sign: bool,
    pub degenerate_projection: bool,
}

impl<T: Scalar> ClaritySolution<T> {
    pub fn clarity(&self) -> T {
        self.rcl.abs()
    }
}

/// Runs both branches and keeps the one with larger `|RCL|`; an exact tie
/// (within `1e-12`) goes to the ascent branch.
pub fn learn_weights<T: Scalar>(
    x_u: &ScoreVector<T>,
    bank: &TrainingBank<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<ClaritySolution<T>> {
    let objective = ClarityObjective::new(x_u, bank, cfg.alpha)?;
    let up = run_branch(&objective, cfg, Direction::Maximized)?;
    let down = run_branch(&objective, cfg, Direction::Minimized)?;

    let same_sign = up.rcl < T::zero() || down.rcl > T::zero();
    let iterations = (up.iterations, down.iterations);
    let degenerate_projection = up.degenerate_projection || down.degenerate_projection;
    let (winner, direction) = if up.rcl.abs() >= down.rcl.abs() - T::lit(1e-12) {
        (up, Direction::Maximized)
    } else {
        (down, Direction::Minimized)
    };
    Ok(ClaritySolution {
        weights: winner.weights,
        rcl: winner.rcl,
        direction,
        iterations,
        alpha: cfg.alpha.get(),
        same_sign,
        degenerate_projection,
    })
}

/// [`learn_weights`] for every instance, in parallel. Failures are
/// reported per instance; output order matches input order.
pub fn learn_batch<T: Scalar>(
    instances: &[ScoreVector<T>],
    bank: &TrainingBank<T>,
    cfg: &OptimizerConfig<T>,
) -> Vec<Result<ClaritySolution<T>>> {
    instances
        .par_iter()
        .map(|x| learn_weights(x, bank, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clarity::rcl_smooth;

    fn sv(v: &[f64]) -> ScoreVector<f64> {
        ScoreVector::new("x", v.to_vec()).unwrap()
    }

    fn cfg(a: f64) -> OptimizerConfig<f64> {
        OptimizerConfig::new(Sharpness::new(a).unwrap())
    }

    fn separable_bank() -> TrainingBank<f64> {
        // classifier 0 separates the classes, classifier 1 is constant
        TrainingBank::new(
            [0.6, 0.7, 0.8, 0.9].iter().map(|&v| sv(&[v, 0.5])).collect(),
            [0.1, 0.2, 0.3, 0.4].iter().map(|&v| sv(&[v, 0.5])).collect(),
        )
        .unwrap()
    }

    fn grid_extremes(x: &ScoreVector<f64>, bank: &TrainingBank<f64>, a: f64) -> (f64, f64) {
        let obj = ClarityObjective::new(x, bank, Sharpness::new(a).unwrap()).unwrap();
        (0..1000)
            .map(|i| {
                let t = std::f64::consts::FRAC_PI_2 * i as f64 / 999.0;
                obj.rcl(&[t.cos(), t.sin()])
            })
            .fold((f64::MIN, f64::MAX), |(hi, lo), v| (hi.max(v), lo.min(v)))
    }

    #[test]
    fn projection_examples() {
        let p = project_feasible(&[3.0, 4.0]);
        assert_eq!(p.weights.values(), &[0.6, 0.8]);
        assert!(!p.degenerate);

        let p = project_feasible(&[-1.0, 2.0]);
        assert_eq!(p.weights.values(), &[0.0, 1.0]);

        let p = project_feasible(&[-2.0, -3.0]);
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(p.weights.values(), &[h, h]);
        assert!(p.degenerate);

        let p = project_feasible(&[0.0, 0.0, 0.0]);
        assert!(p.degenerate);
        assert_eq!(p.weights.dim(), 3);
    }

    #[test]
    fn single_classifier_is_fixed_point() {
        let bank = TrainingBank::new(vec![sv(&[0.8]), sv(&[0.6])], vec![sv(&[0.2])]).unwrap();
        let x = sv(&[0.5]);
        let c = cfg(10.0);
        let expected = rcl_smooth(&x, &WeightVector::new(vec![1.0]).unwrap(), &bank, c.alpha).unwrap();
        for r in [ascend(&x, &bank, &c).unwrap(), descend(&x, &bank, &c).unwrap()] {
            assert_eq!(r.weights.values(), &[1.0]);
            assert_eq!(r.rcl, expected);
        }
        let sol = learn_weights(&x, &bank, &c).unwrap();
        assert_eq!(sol.weights.values(), &[1.0]);
        assert_eq!(sol.direction, Direction::Maximized);
    }

    #[test]
    fn stationary_bank_returns_initialization() {
        let x = sv(&[0.3, 0.6, 0.1]);
        let bank = TrainingBank::new(vec![x.clone()], vec![x.clone(), x.clone()]).unwrap();
        let init = WeightVector::new(vec![0.6, 0.0, 0.8]).unwrap();
        let c = OptimizerConfig {
            init: Init::Custom(init.clone()),
            ..cfg(5.0)
        };
        let up = ascend(&x, &bank, &c).unwrap();
        let down = descend(&x, &bank, &c).unwrap();
        assert_eq!(up.weights, init);
        assert_eq!(down.weights, init);
        assert_eq!(up.iterations, 0);
    }

    #[test]
    fn ascent_reaches_grid_maximum() {
        let bank = separable_bank();
        // x_u below every training point on the separating classifier
        let x = sv(&[0.0, 0.5]);
        let c = cfg(10.0);
        let up = ascend(&x, &bank, &c).unwrap();
        let (hi, _) = grid_extremes(&x, &bank, 10.0);
        assert!(up.rcl >= hi - 0.02, "{} vs {hi}", up.rcl);
    }

    #[test]
    fn descent_reaches_grid_minimum() {
        let bank = separable_bank();
        let x = sv(&[1.0, 0.5]);
        let c = cfg(10.0);
        let down = descend(&x, &bank, &c).unwrap();
        let (_, lo) = grid_extremes(&x, &bank, 10.0);
        assert!(down.rcl <= lo + 0.02, "{} vs {lo}", down.rcl);
    }

    #[test]
    fn descent_mirrors_ascent_under_negation() {
        let bank = separable_bank();
        let neg = |v: &ScoreVector<f64>| sv(&v.values().iter().map(|x| -x).collect::<Vec<_>>());
        let mirrored = TrainingBank::new(
            bank.negatives().iter().map(neg).collect(),
            bank.positives().iter().map(neg).collect(),
        )
        .unwrap();
        let x = sv(&[0.35, 0.7]);
        let c = cfg(6.0);
        let up = ascend(&x, &bank, &c).unwrap();
        let down = descend(&neg(&x), &mirrored, &c).unwrap();
        assert!((up.rcl + down.rcl).abs() < 1e-12);
        assert_eq!(up.weights, down.weights);
    }

    #[test]
    fn branch_traces_are_monotone() {
        let bank = TrainingBank::new(
            vec![sv(&[0.9, 0.2, 0.6]), sv(&[0.7, 0.8, 0.5]), sv(&[0.6, 0.4, 0.9])],
            vec![sv(&[0.1, 0.5, 0.3]), sv(&[0.3, 0.2, 0.6]), sv(&[0.4, 0.7, 0.2])],
        )
        .unwrap();
        let x = sv(&[0.55, 0.3, 0.65]);
        let obj = ClarityObjective::new(&x, &bank, Sharpness::new(15.0).unwrap()).unwrap();
        let start = obj.rcl(WeightVector::<f64>::uniform(3).unwrap().values());
        for k in 1..40 {
            let c = OptimizerConfig { max_iters: k, ..cfg(15.0) };
            let up = ascend(&x, &bank, &c).unwrap();
            let down = descend(&x, &bank, &c).unwrap();
            assert!(up.rcl >= start && down.rcl <= start);
            let c_next = OptimizerConfig { max_iters: k + 1, ..cfg(15.0) };
            assert!(ascend(&x, &bank, &c_next).unwrap().rcl >= up.rcl);
            assert!(descend(&x, &bank, &c_next).unwrap().rcl <= down.rcl);
        }
    }

    #[test]
    fn clear_instances_pick_expected_branch() {
        let bank = TrainingBank::new(
            vec![sv(&[0.7, 0.8]), sv(&[0.9, 0.6])],
            vec![sv(&[0.1, 0.3]), sv(&[0.2, 0.2])],
        )
        .unwrap();
        let c = cfg(10.0);
        // clear of the bank but not so far that both branches saturate
        let pos = learn_weights(&sv(&[1.3, 1.3]), &bank, &c).unwrap();
        assert_eq!(pos.direction, Direction::Minimized);
        assert!(pos.rcl < -0.99);
        let neg = learn_weights(&sv(&[-0.4, -0.4]), &bank, &c).unwrap();
        assert_eq!(neg.direction, Direction::Maximized);
        assert!(neg.rcl > 0.99);
        assert_eq!(neg.clarity(), neg.rcl);

        // fully saturated: both branches hit -1 exactly and the tie rule applies
        let sat = learn_weights(&sv(&[50.0, 50.0]), &bank, &c).unwrap();
        assert_eq!(sat.rcl, -1.0);
        assert_eq!(sat.direction, Direction::Maximized);
        assert!(sat.same_sign);
    }

    #[test]
    fn config_validation() {
        let x = sv(&[0.5, 0.5]);
        let bank = separable_bank();
        for bad in [
            OptimizerConfig { eta: 0.0, ..cfg(1.0) },
            OptimizerConfig { tol: -1.0, ..cfg(1.0) },
            OptimizerConfig { max_iters: 0, ..cfg(1.0) },
            OptimizerConfig {
                init: Init::Custom(WeightVector::uniform(3).unwrap()),
                ..cfg(1.0)
            },
        ] {
            assert!(learn_weights(&x, &bank, &bad).is_err());
        }
    }

    #[test]
    fn huge_alpha_gradient_stays_finite() {
        let bank = separable_bank();
        let sol = learn_weights(&sv(&[0.45, 0.5]), &bank, &cfg(1e3)).unwrap();
        assert!(sol.rcl.is_finite());
    }

    #[test]
    fn batch_matches_individual_calls() {
        let bank = separable_bank();
        let c = cfg(8.0);
        assert!(learn_batch(&[], &bank, &c).is_empty());
        let xs: Vec<_> = (0..12)
            .map(|i| sv(&[i as f64 / 11.0, 1.0 - i as f64 / 22.0]))
            .collect();
        let single = learn_batch(&xs[..1], &bank, &c);
        assert_eq!(single[0].as_ref().unwrap(), &learn_weights(&xs[0], &bank, &c).unwrap());

        let batch = learn_batch(&xs, &bank, &c);
        let mut reversed: Vec<_> = xs.iter().rev().cloned().collect();
        reversed.push(sv(&[0.1]));
        let rev = learn_batch(&reversed, &bank, &c);
        for (i, x) in xs.iter().enumerate() {
            let one = learn_weights(x, &bank, &c).unwrap();
            assert_eq!(batch[i].as_ref().unwrap(), &one);
            assert_eq!(rev[xs.len() - 1 - i].as_ref().unwrap(), &one);
        }
        // the bad instance fails alone
        assert!(rev.last().unwrap().is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let bank = TrainingBank::new(
            vec![ScoreVector::new("p", vec![0.8f32, 0.7]).unwrap()],
            vec![ScoreVector::new("n", vec![0.2f32, 0.4]).unwrap()],
        )
        .unwrap();
        let c = OptimizerConfig::new(Sharpness::new(10.0f32).unwrap());
        let sol = learn_weights(&ScoreVector::new("u", vec![0.9f32, 0.1]).unwrap(), &bank, &c).unwrap();
        let norm: f32 = sol.weights.values().iter().map(|v| v * v).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn projection_is_feasible_and_idempotent(v in prop::collection::vec(-10.0f64..10.0, 1..8)) {
                let p = project_feasible(&v);
                let w = p.weights.values();
                prop_assert!(w.iter().all(|&x| x >= 0.0));
                prop_assert!((l2_norm(w) - 1.0).abs() < 1e-9);
                let again = project_feasible(w);
                prop_assert!(!again.degenerate);
                for (a, b) in again.weights.values().iter().zip(w) {
                    prop_assert!((a - b).abs() < 1e-15);
                }
                prop_assert_eq!(p.degenerate, v.iter().all(|&x| x <= 0.0));
            }

            #[test]
            fn learned_weights_feasible_and_no_worse_than_start(
                xu in prop::collection::vec(0.0f64..1.0, 3),
                pos in prop::collection::vec(prop::collection::vec(0.3f64..1.0, 3), 1..8),
                neg in prop::collection::vec(prop::collection::vec(0.0f64..0.7, 3), 1..8),
                a in 1.0f64..30.0,
            ) {
                let bank = TrainingBank::new(
                    pos.iter().map(|v| sv(v)).collect(),
                    neg.iter().map(|v| sv(v)).collect(),
                ).unwrap();
                let x = sv(&xu);
                let c = cfg(a);
                let sol = learn_weights(&x, &bank, &c).unwrap();
                let w = sol.weights.values();
                prop_assert!(w.iter().all(|&v| v >= 0.0));
                prop_assert!((l2_norm(w) - 1.0).abs() < 1e-9);
                let start = rcl_smooth(&x, &WeightVector::uniform(3).unwrap(), &bank, c.alpha).unwrap();
                prop_assert!(sol.clarity() >= start.abs() - 1e-15);
                prop_assert!(sol.rcl.abs() <= 1.0);
                // bit-identical rerun
                prop_assert_eq!(learn_weights(&x, &bank, &c).unwrap(), sol);
            }
        }
    }
}
