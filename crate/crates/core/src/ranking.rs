//! Ranking rules over learned solutions and N-best classifier selection.

use std::cmp::Ordering;

use serde::Serialize;

use crate::data::{check_len, fused_score, ScoreVector, WeightVector};
use crate::error::{FusionError, Result};
use crate::optimizer::ClaritySolution;
use crate::scalar::{l2_norm, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RankCriterion {
    /// Plain mean of all classifier scores.
    Average,
    WeightedScore,
    RawClarity,
    NBestAverage,
    NBestWeighted,
}

impl RankCriterion {
    /// Raw clarity ranks ascending (most negative first); everything else
    /// ranks by descending score.
    pub fn ascending(self) -> bool {
        matches!(self, RankCriterion::RawClarity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedEntry<T> {
    pub instance_id: String,
    pub score: T,
    /// Position in the input; ties keep input order.
    pub original_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedList<T> {
    pub entries: Vec<RankedEntry<T>>,
    pub criterion: RankCriterion,
}

impl<T: Scalar> RankedList<T> {
    /// Sorts `(id, score)` pairs under `criterion`'s direction. Scores must
    /// be finite.
    pub fn from_scores<I, S>(scored: I, criterion: RankCriterion) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
    {
        let mut entries: Vec<_> = scored
            .into_iter()
            .enumerate()
            .map(|(original_index, (id, score))| RankedEntry {
                instance_id: id.into(),
                score,
                original_index,
            })
            .collect();
        let order = |a: &RankedEntry<T>, b: &RankedEntry<T>| {
            a.score.partial_cmp(&b.score).unwrap_or(Ordering::Equal)
        };
        // sort_by is stable
        if criterion.ascending() {
            entries.sort_by(order);
        } else {
            entries.sort_by(|a, b| order(b, a));
        }
        Self { entries, criterion }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.instance_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn rank_by_average<T: Scalar>(instances: &[ScoreVector<T>]) -> RankedList<T> {
    RankedList::from_scores(
        instances.iter().map(|x| (x.id(), x.mean())),
        RankCriterion::Average,
    )
}

/// Descending order of `w_u . x_u`.
pub fn rank_by_weighted_score<T: Scalar>(
    solutions: &[(&ScoreVector<T>, &ClaritySolution<T>)],
) -> Result<RankedList<T>> {
    let scored = solutions
        .iter()
        .map(|(x, s)| Ok((x.id(), fused_score(&s.weights, x)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RankedList::from_scores(scored, RankCriterion::WeightedScore))
}

/// Ascending order of the optimal raw clarity: instances whose clarity was
/// driven towards -1 look most positive and come first.
pub fn rank_by_raw_clarity<T: Scalar, S: AsRef<str>>(
    solutions: &[(S, &ClaritySolution<T>)],
) -> RankedList<T> {
    RankedList::from_scores(
        solutions.iter().map(|(id, s)| (id.as_ref(), s.rcl)),
        RankCriterion::RawClarity,
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NBestSelection {
    pub instance_id: String,
    /// Ascending classifier indices.
    pub selected: Vec<usize>,
    pub n: usize,
}

/// Indices of the `n` largest weights; equal weights prefer the lower index.
pub fn select_n_best<T: Scalar>(
    instance_id: &str,
    w: &WeightVector<T>,
    n: usize,
) -> Result<NBestSelection> {
    let m = w.dim();
    if n == 0 || n > m {
        return Err(FusionError::InvalidParameter(format!(
            "N must be in 1..={m}, got {n}"
        )));
    }
    let vals = w.values();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        vals[b]
            .partial_cmp(&vals[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut selected = order[..n].to_vec();
    selected.sort_unstable();
    Ok(NBestSelection {
        instance_id: instance_id.to_string(),
        selected,
        n,
    })
}

fn check_indices(sel: &NBestSelection, m: usize) -> Result<()> {
    match sel.selected.iter().find(|&&i| i >= m) {
        Some(&index) => Err(FusionError::IndexOutOfRange { index, len: m }),
        None if sel.selected.is_empty() => Err(FusionError::Empty("N-best selection")),
        None => Ok(()),
    }
}

/// Mean of the selected classifiers' scores.
pub fn nbest_average_score<T: Scalar>(x: &ScoreVector<T>, sel: &NBestSelection) -> Result<T> {
    check_indices(sel, x.dim())?;
    let v = x.values();
    let sum = sel.selected.iter().fold(T::zero(), |acc, &i| acc + v[i]);
    Ok(sum / T::from_count(sel.selected.len()))
}

/// `sum_{i in sel} w_i x_i`. With `renormalize`, the selected weights are
/// first rescaled to unit norm.
pub fn nbest_weighted_score<T: Scalar>(
    x: &ScoreVector<T>,
    w: &WeightVector<T>,
    sel: &NBestSelection,
    renormalize: bool,
) -> Result<T> {
    check_len(w.dim(), x.dim())?;
    check_indices(sel, x.dim())?;
    let (xv, wv) = (x.values(), w.values());
    if !renormalize {
        return Ok(sel
            .selected
            .iter()
            .fold(T::zero(), |acc, &i| acc + wv[i] * xv[i]));
    }
    let picked: Vec<T> = sel.selected.iter().map(|&i| wv[i]).collect();
    let norm = l2_norm(&picked);
    let scale = if norm > T::zero() { T::one() / norm } else { T::one() };
    Ok(sel
        .selected
        .iter()
        .fold(T::zero(), |acc, &i| acc + wv[i] * scale * xv[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::Direction;

    fn sv(id: &str, v: &[f64]) -> ScoreVector<f64> {
        ScoreVector::new(id, v.to_vec()).unwrap()
    }

    fn solution(w: &[f64], rcl: f64) -> ClaritySolution<f64> {
        ClaritySolution {
            weights: WeightVector::new(w.to_vec()).unwrap(),
            rcl,
            direction: Direction::Maximized,
            iterations: (0, 0),
            alpha: 1.0,
            same_sign: false,
            degenerate_projection: false,
        }
    }

    fn ids(list: &RankedList<f64>) -> Vec<&str> {
        list.ids().collect()
    }

    #[test]
    fn weighted_score_ordering() {
        let xs = [sv("a", &[0.9]), sv("b", &[0.2]), sv("c", &[0.5])];
        let s = solution(&[1.0], 0.0);
        let pairs: Vec<_> = xs.iter().map(|x| (x, &s)).collect();
        let list = rank_by_weighted_score(&pairs).unwrap();
        assert_eq!(ids(&list), ["a", "c", "b"]);
        assert_eq!(list.criterion, RankCriterion::WeightedScore);

        let tie = [sv("x", &[0.4]), sv("y", &[0.4])];
        let pairs: Vec<_> = tie.iter().map(|x| (x, &s)).collect();
        assert_eq!(ids(&rank_by_weighted_score(&pairs).unwrap()), ["x", "y"]);

        let pairs = [(&xs[1], &s)];
        assert_eq!(rank_by_weighted_score(&pairs).unwrap().len(), 1);

        let wide = sv("w", &[0.1, 0.2]);
        assert!(rank_by_weighted_score(&[(&wide, &s)]).is_err());
    }

    #[test]
    fn raw_clarity_ordering() {
        let (a, b, c) = (solution(&[1.0], -0.9), solution(&[1.0], 0.2), solution(&[1.0], 0.8));
        let list = rank_by_raw_clarity(&[("c", &c), ("a", &a), ("b", &b)]);
        assert_eq!(ids(&list), ["a", "b", "c"]);
        assert_eq!(list.entries[0].original_index, 1);

        let list = rank_by_raw_clarity(&[("p", &b), ("q", &b), ("r", &b)]);
        assert_eq!(ids(&list), ["p", "q", "r"]);

        let (a, b) = (solution(&[1.0], -0.1), solution(&[1.0], -0.7));
        assert_eq!(ids(&rank_by_raw_clarity(&[("a", &a), ("b", &b)])), ["b", "a"]);
    }

    #[test]
    fn n_best_selection() {
        let raw = [0.1, 0.7, 0.2, 0.68];
        let n = l2_norm(&raw);
        let w = WeightVector::new(raw.iter().map(|v| v / n).collect()).unwrap();
        assert_eq!(select_n_best("u", &w, 2).unwrap().selected, [1, 3]);
        assert_eq!(select_n_best("u", &w, 4).unwrap().selected, [0, 1, 2, 3]);

        let u = WeightVector::<f64>::uniform(5).unwrap();
        assert_eq!(select_n_best("u", &u, 1).unwrap().selected, [0]);
        assert_eq!(select_n_best("u", &u, 3).unwrap().selected, [0, 1, 2]);

        assert!(select_n_best("u", &u, 0).is_err());
        assert!(select_n_best("u", &u, 6).is_err());
    }

    #[test]
    fn n_best_scores() {
        let x = sv("u", &[0.2, 0.8, 0.6]);
        let sel = |s: &[usize]| NBestSelection {
            instance_id: "u".into(),
            selected: s.to_vec(),
            n: s.len(),
        };
        assert!((nbest_average_score(&x, &sel(&[1, 2])).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(nbest_average_score(&x, &sel(&[0, 1, 2])).unwrap(), x.mean());
        assert_eq!(nbest_average_score(&x, &sel(&[2])).unwrap(), 0.6);
        assert!(matches!(
            nbest_average_score(&x, &sel(&[3])),
            Err(FusionError::IndexOutOfRange { index: 3, len: 3 })
        ));
        assert!(nbest_average_score(&x, &sel(&[])).is_err());

        let w = WeightVector::new(vec![0.6, 0.8]).unwrap();
        let ones = sv("o", &[1.0, 1.0]);
        assert_eq!(nbest_weighted_score(&ones, &w, &sel(&[1]), false).unwrap(), 0.8);
        assert_eq!(nbest_weighted_score(&ones, &w, &sel(&[1]), true).unwrap(), 1.0);
        let y = sv("y", &[0.3, 0.9]);
        assert_eq!(
            nbest_weighted_score(&y, &w, &sel(&[0, 1]), false).unwrap(),
            fused_score(&w, &y).unwrap()
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn uniform_weights_rank_like_means(
                rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..30),
                dups in prop::collection::vec(any::<prop::sample::Index>(), 0..10),
            ) {
                // duplicated rows create exact ties
                let mut all = rows.clone();
                for d in &dups {
                    all.push(rows[d.index(rows.len())].clone());
                }
                let xs: Vec<_> = all.iter().enumerate().map(|(i, r)| sv(&i.to_string(), r)).collect();
                let s = solution(&[1.0 / 3f64.sqrt(); 3], 0.0);
                let pairs: Vec<_> = xs.iter().map(|x| (x, &s)).collect();
                let weighted = rank_by_weighted_score(&pairs).unwrap();
                let mut oracle: Vec<(usize, f64)> = all
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (i, r.iter().sum::<f64>() / 3.0))
                    .collect();
                oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                let want: Vec<usize> = oracle.iter().map(|o| o.0).collect();
                let got: Vec<usize> = weighted.entries.iter().map(|e| e.original_index).collect();
                prop_assert_eq!(&got, &want);
                let avg: Vec<usize> = rank_by_average(&xs).entries.iter().map(|e| e.original_index).collect();
                prop_assert_eq!(avg, want);
            }

            #[test]
            fn selection_scale_invariant(
                raw in prop::collection::vec(0.01f64..1.0, 1..8),
                c in 0.1f64..10.0,
                n_frac in 0.0f64..1.0,
            ) {
                let m = raw.len();
                let n = 1 + ((m - 1) as f64 * n_frac) as usize;
                let unit = |v: &[f64]| {
                    let norm = l2_norm(v);
                    WeightVector::new(v.iter().map(|x| x / norm).collect()).unwrap()
                };
                let scaled: Vec<f64> = raw.iter().map(|v| v * c).collect();
                let mut order: Vec<usize> = (0..m).collect();
                order.sort_by(|&a, &b| raw[b].partial_cmp(&raw[a]).unwrap().then(a.cmp(&b)));
                let mut want = order[..n].to_vec();
                want.sort_unstable();
                prop_assert_eq!(&select_n_best("u", &unit(&raw), n).unwrap().selected, &want);
                prop_assert_eq!(&select_n_best("u", &unit(&scaled), n).unwrap().selected, &want);
            }

            #[test]
            fn full_selection_reduces_to_full_fusion(
                x in prop::collection::vec(-3.0f64..3.0, 1..7),
                raw in prop::collection::vec(0.0f64..1.0, 7),
            ) {
                let m = x.len();
                let raw = &raw[..m];
                let norm = l2_norm(raw);
                if norm < 1e-6 { return Ok(()); }
                let w = WeightVector::new(raw.iter().map(|v| v / norm).collect()).unwrap();
                let xv = sv("u", &x);
                let sel = select_n_best("u", &w, m).unwrap();
                prop_assert_eq!(nbest_average_score(&xv, &sel).unwrap(), xv.mean());
                prop_assert_eq!(
                    nbest_weighted_score(&xv, &w, &sel, false).unwrap(),
                    fused_score(&w, &xv).unwrap()
                );
            }

            #[test]
            fn ranking_is_permutation_equivariant(
                scores in prop::collection::vec(0u8..5, 1..25),
                seed in any::<u64>(),
            ) {
                use rand::{seq::SliceRandom, SeedableRng};
                let items: Vec<(String, f64)> = scores
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| (format!("i{i}"), s as f64))
                    .collect();
                let mut shuffled = items.clone();
                shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                let a = RankedList::from_scores(items.clone(), RankCriterion::WeightedScore);
                let b = RankedList::from_scores(shuffled.clone(), RankCriterion::WeightedScore);
                let sa: Vec<f64> = a.entries.iter().map(|e| e.score).collect();
                let sb: Vec<f64> = b.entries.iter().map(|e| e.score).collect();
                prop_assert_eq!(sa, sb);
                // within equal scores, ids keep their input order
                for (list, input) in [(&a, &items), (&b, &shuffled)] {
                    let pos = |id: &str| input.iter().position(|(i, _)| i == id).unwrap();
                    for pair in list.entries.windows(2) {
                        if pair[0].score == pair[1].score {
                            prop_assert!(pos(&pair[0].instance_id) < pos(&pair[1].instance_id));
                        }
                    }
                }
            }
        }
    }
}
