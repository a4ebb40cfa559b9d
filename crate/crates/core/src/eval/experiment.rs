use serde::Serialize;

use crate::data::{fused_score, LabeledInstance, ScoreVector, TrainingBank};
use crate::error::{FusionError, Result};
use crate::optimizer::{learn_batch, ClaritySolution, Direction, OptimizerConfig};
use crate::ranking::{
    nbest_average_score, nbest_weighted_score, rank_by_average, select_n_best,
    NBestSelection, RankCriterion, RankedList,
};
use crate::scalar::Scalar;

use super::metrics::average_precision;

/// How a test set is scored before ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FusionMode {
    Average,
    WeightedScore,
    RawClarity,
    NBestAverage(usize),
    NBestWeighted(usize),
}

impl FusionMode {
    pub fn needs_weights(self) -> bool {
        self != FusionMode::Average
    }

    pub fn criterion(self) -> RankCriterion {
        match self {
            FusionMode::Average => RankCriterion::Average,
            FusionMode::WeightedScore => RankCriterion::WeightedScore,
            FusionMode::RawClarity => RankCriterion::RawClarity,
            FusionMode::NBestAverage(_) => RankCriterion::NBestAverage,
            FusionMode::NBestWeighted(_) => RankCriterion::NBestWeighted,
        }
    }

    pub fn label(self) -> String {
        match self {
            FusionMode::Average => "average".into(),
            FusionMode::WeightedScore => "weighted".into(),
            FusionMode::RawClarity => "raw-clarity".into(),
            FusionMode::NBestAverage(n) => format!("nbest-avg@{n}"),
            FusionMode::NBestWeighted(n) => format!("nbest-weighted@{n}"),
        }
    }
}

/// Learns weights for every instance, failing on the first bad one.
pub fn learn_all<T: Scalar>(
    instances: &[ScoreVector<T>],
    bank: &TrainingBank<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<Vec<ClaritySolution<T>>> {
    learn_batch(instances, bank, cfg).into_iter().collect()
}

/// Ranks `instances` under `mode`. `solutions` must align with `instances`
/// unless the mode is [`FusionMode::Average`]. The second element holds the
/// per-instance N-best selections for N-best modes.
pub fn rank_instances<T: Scalar>(
    instances: &[ScoreVector<T>],
    solutions: &[ClaritySolution<T>],
    mode: FusionMode,
    renormalize: bool,
) -> Result<(RankedList<T>, Vec<Option<NBestSelection>>)> {
    if mode == FusionMode::Average {
        return Ok((rank_by_average(instances), vec![None; instances.len()]));
    }
    if solutions.len() != instances.len() {
        return Err(FusionError::InvalidParameter(format!(
            "{} solutions for {} instances",
            solutions.len(),
            instances.len()
        )));
    }
    let mut selections = Vec::with_capacity(instances.len());
    let mut scored = Vec::with_capacity(instances.len());
    for (x, sol) in instances.iter().zip(solutions) {
        let (score, sel) = match mode {
            FusionMode::Average => unreachable!(),
            FusionMode::WeightedScore => (fused_score(&sol.weights, x)?, None),
            FusionMode::RawClarity => (sol.rcl, None),
            FusionMode::NBestAverage(n) => {
                let sel = select_n_best(x.id(), &sol.weights, n)?;
                (nbest_average_score(x, &sel)?, Some(sel))
            }
            FusionMode::NBestWeighted(n) => {
                let sel = select_n_best(x.id(), &sol.weights, n)?;
                (nbest_weighted_score(x, &sol.weights, &sel, renormalize)?, Some(sel))
            }
        };
        scored.push((x.id(), score));
        selections.push(sel);
    }
    Ok((RankedList::from_scores(scored, mode.criterion()), selections))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceDiagnostic<T> {
    pub instance_id: String,
    pub positive: bool,
    pub ranking_score: T,
    /// 1-based position in the ranking.
    pub rank: usize,
    pub weights: Option<Vec<T>>,
    pub rcl: Option<T>,
    pub direction: Option<Direction>,
    pub selected: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport<T> {
    pub mode: FusionMode,
    pub average_precision: T,
    pub ranking: RankedList<T>,
    /// In test-set order.
    pub diagnostics: Vec<InstanceDiagnostic<T>>,
}

/// Scores, ranks and evaluates a labeled test set with already learned
/// solutions (ignored for [`FusionMode::Average`]).
pub fn evaluate_mode<T: Scalar>(
    test: &[LabeledInstance<T>],
    solutions: &[ClaritySolution<T>],
    mode: FusionMode,
    renormalize: bool,
) -> Result<ExperimentReport<T>> {
    let instances: Vec<_> = test.iter().map(|t| t.scores.clone()).collect();
    let (ranking, selections) = rank_instances(&instances, solutions, mode, renormalize)?;
    let labels: Vec<bool> = ranking
        .entries
        .iter()
        .map(|e| test[e.original_index].label.is_positive())
        .collect();
    let ap = average_precision(&labels)?;

    let mut diagnostics: Vec<Option<InstanceDiagnostic<T>>> = vec![None; test.len()];
    for (pos, entry) in ranking.entries.iter().enumerate() {
        let i = entry.original_index;
        let sol = mode.needs_weights().then(|| &solutions[i]);
        diagnostics[i] = Some(InstanceDiagnostic {
            instance_id: entry.instance_id.clone(),
            positive: test[i].label.is_positive(),
            ranking_score: entry.score,
            rank: pos + 1,
            weights: sol.map(|s| s.weights.values().to_vec()),
            rcl: sol.map(|s| s.rcl),
            direction: sol.map(|s| s.direction),
            selected: selections[i].as_ref().map(|s| s.selected.clone()),
        });
    }
    Ok(ExperimentReport {
        mode,
        average_precision: ap,
        ranking,
        diagnostics: diagnostics.into_iter().map(|d| d.expect("every index ranked")).collect(),
    })
}

/// Learns per-instance weights when the mode needs them, then ranks and
/// evaluates the test set.
pub fn run_experiment<T: Scalar>(
    bank: &TrainingBank<T>,
    test: &[LabeledInstance<T>],
    cfg: &OptimizerConfig<T>,
    mode: FusionMode,
) -> Result<ExperimentReport<T>> {
    let solutions = if mode.needs_weights() {
        let xs: Vec<_> = test.iter().map(|t| t.scores.clone()).collect();
        learn_all(&xs, bank, cfg)?
    } else {
        Vec::new()
    };
    evaluate_mode(test, &solutions, mode, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clarity::Sharpness;
    use crate::eval::synth::{generate_synthetic, ClassProfile, SynthSpec};

    fn cfg() -> OptimizerConfig<f64> {
        OptimizerConfig::new(Sharpness::new(10.0).unwrap())
    }

    fn data(m: usize, seed: u64) -> (TrainingBank<f64>, Vec<LabeledInstance<f64>>) {
        let spec = SynthSpec::homogeneous(m, ClassProfile::new(0.65, 0.35, 0.2), 15, 40, seed);
        generate_synthetic(&spec).unwrap()
    }

    /// AP of the test set sorted by row mean, computed without the crate's
    /// ranking code.
    fn mean_sort_ap(test: &[LabeledInstance<f64>]) -> f64 {
        let mut rows: Vec<(usize, f64, bool)> = test
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let v = t.scores.values();
                (i, v.iter().sum::<f64>() / v.len() as f64, t.label.is_positive())
            })
            .collect();
        rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut hits = 0.0;
        let mut sum = 0.0;
        for (k, r) in rows.iter().enumerate() {
            if r.2 {
                hits += 1.0;
                sum += hits / (k + 1) as f64;
            }
        }
        sum / hits
    }

    #[test]
    fn average_mode_matches_mean_sort() {
        for seed in 0..5 {
            let (bank, test) = data(4, seed);
            let r = run_experiment(&bank, &test, &cfg(), FusionMode::Average).unwrap();
            assert!((r.average_precision - mean_sort_ap(&test)).abs() < 1e-12);
            assert!(r.diagnostics.iter().all(|d| d.weights.is_none()));
        }
    }

    #[test]
    fn nbest_average_at_m_equals_average() {
        let (bank, test) = data(3, 7);
        let avg = run_experiment(&bank, &test, &cfg(), FusionMode::Average).unwrap();
        let nb = run_experiment(&bank, &test, &cfg(), FusionMode::NBestAverage(3)).unwrap();
        assert_eq!(avg.average_precision, nb.average_precision);
        assert_eq!(avg.ranking.entries, nb.ranking.entries);
    }

    #[test]
    fn separable_data_is_perfect_in_every_mode() {
        let mut spec = SynthSpec::homogeneous(1, ClassProfile::new(0.8, 0.2, 0.05), 10, 30, 4);
        spec.classifiers[0] = ClassProfile::new(0.9, 0.1, 0.02);
        let (bank, test) = generate_synthetic::<f64>(&spec).unwrap();
        for mode in [
            FusionMode::Average,
            FusionMode::WeightedScore,
            FusionMode::RawClarity,
            FusionMode::NBestAverage(1),
            FusionMode::NBestWeighted(1),
        ] {
            let r = run_experiment(&bank, &test, &cfg(), mode).unwrap();
            assert_eq!(r.average_precision, 1.0, "{mode:?}");
        }
    }

    #[test]
    fn diagnostics_cover_every_instance() {
        let (bank, test) = data(3, 1);
        let r = run_experiment(&bank, &test, &cfg(), FusionMode::NBestWeighted(2)).unwrap();
        assert_eq!(r.diagnostics.len(), test.len());
        let mut ranks: Vec<usize> = r.diagnostics.iter().map(|d| d.rank).collect();
        ranks.sort_unstable();
        assert_eq!(ranks, (1..=test.len()).collect::<Vec<_>>());
        for (d, t) in r.diagnostics.iter().zip(&test) {
            assert_eq!(d.instance_id, t.scores.id());
            assert_eq!(d.selected.as_ref().unwrap().len(), 2);
            assert!(d.rcl.is_some() && d.direction.is_some());
        }
    }

    #[test]
    fn bad_inputs() {
        let (bank, test) = data(3, 1);
        assert!(run_experiment(&bank, &test, &cfg(), FusionMode::NBestAverage(4)).is_err());
        assert!(run_experiment(&bank, &test, &cfg(), FusionMode::NBestAverage(0)).is_err());
        let xs: Vec<_> = test.iter().map(|t| t.scores.clone()).collect();
        assert!(rank_instances(&xs, &[], FusionMode::WeightedScore, false).is_err());
        let negatives: Vec<_> = test.iter().filter(|t| !t.label.is_positive()).cloned().collect();
        assert_eq!(
            run_experiment(&bank, &negatives, &cfg(), FusionMode::Average).unwrap_err(),
            FusionError::NoPositives
        );
    }
}
