use std::cmp::Ordering;

use crate::dataset::{DocId, Objective, QueryGroup, QueryId, RankingDataset};
use crate::error::{Error, Result};

/// Anything that maps a feature vector to a ranking score.
pub trait Scorer {
    fn score(&self, features: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> Scorer for F {
    fn score(&self, features: &[f64]) -> f64 {
        self(features)
    }
}

#[inline]
pub fn gain(grade: u8) -> f64 {
    ((1u32 << grade) - 1) as f64
}

/// Discount for 1-based rank `position`.
#[inline]
pub fn discount(position: usize) -> f64 {
    1.0 / ((position + 1) as f64).log2()
}

/// `sum_{i=1}^{min(k, n)} (2^g_i - 1) / log2(i + 1)` over grades in rank order.
pub fn dcg_at_k(ranked: &[u8], k: usize) -> f64 {
    ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) * discount(i + 1))
        .sum()
}

pub fn ideal_dcg_at_k(grades: &[u8], k: usize) -> f64 {
    let mut ideal = grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    dcg_at_k(&ideal, k)
}

/// NDCG@k of grades in rank order; `None` when the ideal DCG is 0 (the query
/// carries no ordering information and is skipped).
pub fn ndcg_at_k(ranked: &[u8], k: usize) -> Option<f64> {
    let ideal = ideal_dcg_at_k(ranked, k);
    if ideal > 0.0 {
        Some(dcg_at_k(ranked, k) / ideal)
    } else {
        None
    }
}

/// Indices sorted by descending score, ties broken by ascending doc id.
pub fn rank_order(scores: &[f64], doc_ids: &[&DocId]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| doc_ids[a].cmp(doc_ids[b]))
    });
    order
}

/// Scores every document of `group` and returns its grades in rank order.
pub fn ranked_grades(
    scorer: &dyn Scorer,
    group: &QueryGroup,
    objective: Objective,
) -> Result<Vec<u8>> {
    let grades = group.grades(objective).ok_or_else(|| {
        Error::UndefinedMetric(format!("query {} lacks {objective} labels", group.query_id))
    })?;
    let scores: Vec<f64> = group
        .instances
        .iter()
        .map(|inst| scorer.score(inst.features.values()))
        .collect();
    let ids: Vec<&DocId> = group.instances.iter().map(|i| &i.doc_id).collect();
    Ok(rank_order(&scores, &ids).into_iter().map(|i| grades[i]).collect())
}

/// Per-query NDCG@k; skipped queries carry `None`.
pub fn per_query_ndcg(
    scorer: &dyn Scorer,
    dataset: &RankingDataset,
    objective: Objective,
    k: usize,
) -> Result<Vec<(QueryId, Option<f64>)>> {
    dataset
        .groups()
        .iter()
        .map(|g| Ok((g.query_id, ndcg_at_k(&ranked_grades(scorer, g, objective)?, k))))
        .collect()
}

/// Unweighted mean of per-query NDCG@k over non-skipped queries.
pub fn mean_ndcg(
    scorer: &dyn Scorer,
    dataset: &RankingDataset,
    objective: Objective,
    k: usize,
) -> Result<f64> {
    mean_of_scored(&per_query_ndcg(scorer, dataset, objective, k)?)
}

pub fn mean_of_scored(per_query: &[(QueryId, Option<f64>)]) -> Result<f64> {
    let values: Vec<f64> = per_query.iter().filter_map(|(_, v)| *v).collect();
    if values.is_empty() {
        return Err(Error::UndefinedMetric(
            "no query with a nonzero ideal DCG".into(),
        ));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Compares by score descending with doc-id tie-break; exposed for callers
/// that sort their own (score, id) pairs.
pub fn score_order(a: (f64, &DocId), b: (f64, &DocId)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureRegistry, FeatureVector, Labels, RankingInstance};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn dcg_examples() {
        assert_eq!(dcg_at_k(&[4, 0, 0], 10), 15.0);
        assert_eq!(dcg_at_k(&[0, 0, 0], 10), 0.0);
        assert_abs_diff_eq!(dcg_at_k(&[0, 4], 2), 15.0 / 3f64.log2(), epsilon = 1e-12);
        assert_abs_diff_eq!(dcg_at_k(&[0, 4], 2), 9.4639, epsilon = 1e-4);
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&[4, 3, 1, 0], 10), Some(1.0));
        assert_abs_diff_eq!(ndcg_at_k(&[0, 4], 2).unwrap(), 0.6309, epsilon = 1e-4);
        assert_eq!(ndcg_at_k(&[0, 0, 0], 10), None);
        assert_eq!(ndcg_at_k(&[], 10), None);
    }

    fn dataset(per_query: &[&[u8]]) -> RankingDataset {
        let groups = per_query
            .iter()
            .enumerate()
            .map(|(q, grades)| QueryGroup {
                query_id: QueryId(q as u64),
                instances: grades
                    .iter()
                    .enumerate()
                    .map(|(d, &g)| RankingInstance {
                        query_id: QueryId(q as u64),
                        doc_id: DocId(format!("d{d}")),
                        features: FeatureVector::new(vec![g as f64]),
                        labels: Labels::single(Objective::Ctr, g),
                    })
                    .collect(),
            })
            .collect();
        RankingDataset::new(FeatureRegistry::anonymous(1), groups).unwrap()
    }

    #[test]
    fn mean_ndcg_oracle_and_anti_oracle() {
        let ds = dataset(&[&[4, 0], &[4, 0], &[0, 4]]);
        let oracle = |x: &[f64]| x[0];
        let anti = |x: &[f64]| -x[0];
        assert_eq!(mean_ndcg(&oracle, &ds, Objective::Ctr, 10).unwrap(), 1.0);
        assert_abs_diff_eq!(
            mean_ndcg(&anti, &ds, Objective::Ctr, 10).unwrap(),
            0.6309,
            epsilon = 1e-4
        );
    }

    #[test]
    fn skipped_queries_and_ties() {
        let ds = dataset(&[&[0, 0], &[1, 0]]);
        let constant = |_: &[f64]| 0.0;
        // Ties resolve by doc id: d0 (grade 1) first.
        assert_eq!(mean_ndcg(&constant, &ds, Objective::Ctr, 10).unwrap(), 1.0);
        let all_zero = dataset(&[&[0, 0]]);
        assert!(matches!(
            mean_ndcg(&constant, &all_zero, Objective::Ctr, 10),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(mean_ndcg(&constant, &ds, Objective::Or, 10).is_err());
    }

    #[test]
    fn random_scores_bounded() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let per: Vec<Vec<u8>> = (0..50)
            .map(|_| (0..8).map(|_| rng.random_range(0..=4)).collect())
            .collect();
        let refs: Vec<&[u8]> = per.iter().map(|v| v.as_slice()).collect();
        let ds = dataset(&refs);
        let noise = |x: &[f64]| (x[0] * 12.9898).sin().fract();
        let m = mean_ndcg(&noise, &ds, Objective::Ctr, 10).unwrap();
        assert!(m > 0.0 && m <= 1.0);
    }

    proptest! {
        #[test]
        fn ndcg_bounds_and_perfection(grades in prop::collection::vec(0u8..=4, 1..12), k in 1usize..12) {
            if let Some(v) = ndcg_at_k(&grades, k) {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
                let sorted_desc = grades.windows(2).all(|w| w[0] >= w[1]);
                if sorted_desc {
                    prop_assert!((v - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn swapping_higher_grade_forward_never_lowers_dcg(
            grades in prop::collection::vec(0u8..=4, 2..10), i in 0usize..10, j in 0usize..10, k in 1usize..10
        ) {
            let (i, j) = (i % grades.len(), j % grades.len());
            let (lo, hi) = (i.min(j), i.max(j));
            prop_assume!(grades[hi] > grades[lo]);
            let mut swapped = grades.clone();
            swapped.swap(lo, hi);
            prop_assert!(dcg_at_k(&swapped, k) >= dcg_at_k(&grades, k) - 1e-12);
        }
    }
}
