//! Engagement logs to graded relevance labels.
//!
//! Low-impression pairs are dropped, each surviving pair gets four rates, and
//! every rate is normalized by the per-query maximum and ceiled onto 0..=4.

use std::collections::HashMap;

use crate::dataset::{
    DocId, EngagementRecord, FeatureRegistry, FeatureVector, Labels, Objective, QueryGroup,
    QueryId, RankingDataset, RankingInstance,
};
use crate::error::{Error, Result};

pub const DEFAULT_IMPRESSION_THRESHOLD: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngagementRates {
    pub ctr: f64,
    pub atcr: f64,
    pub or: f64,
    pub revr: f64,
}

impl EngagementRates {
    pub fn get(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Ctr => self.ctr,
            Objective::Atcr => self.atcr,
            Objective::Or => self.or,
            Objective::Revr => self.revr,
        }
    }
}

pub fn compute_rates(record: &EngagementRecord) -> Result<EngagementRates> {
    if record.impressions == 0 {
        return Err(Error::Precondition(format!(
            "({}, {}) has zero impressions",
            record.query_id, record.doc_id
        )));
    }
    let imp = record.impressions as f64;
    Ok(EngagementRates {
        ctr: record.clicks as f64 / imp,
        atcr: if record.clicks == 0 {
            0.0
        } else {
            record.atc as f64 / record.clicks as f64
        },
        or: record.orders as f64 / imp,
        revr: record.revenue / imp,
    })
}

/// Records grouped by query, in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilteredQueryPool {
    pub queries: Vec<(QueryId, Vec<EngagementRecord>)>,
}

impl FilteredQueryPool {
    pub fn num_pairs(&self) -> usize {
        self.queries.iter().map(|(_, r)| r.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Keeps records with `impressions >= threshold`; queries left empty vanish.
pub fn filter_low_impressions(
    records: &[EngagementRecord],
    threshold: u64,
) -> Result<FilteredQueryPool> {
    if threshold == 0 {
        return Err(Error::Precondition("impression threshold must be at least 1".into()));
    }
    let mut index: HashMap<QueryId, usize> = HashMap::new();
    let mut queries: Vec<(QueryId, Vec<EngagementRecord>)> = Vec::new();
    for r in records.iter().filter(|r| r.impressions >= threshold) {
        let slot = *index.entry(r.query_id).or_insert_with(|| {
            queries.push((r.query_id, Vec::new()));
            queries.len() - 1
        });
        queries[slot].1.push(r.clone());
    }
    Ok(FilteredQueryPool { queries })
}

/// Grade for one rate given the query maximum.
pub fn grade(rate: f64, max_rate: f64) -> u8 {
    if max_rate <= 0.0 || rate <= 0.0 {
        return 0;
    }
    let scaled = 4.0 * rate / max_rate;
    let nearest = scaled.round();
    let g = if (scaled - nearest).abs() < 1e-12 {
        nearest
    } else {
        scaled.ceil()
    };
    // Only the maximum earns 4 and only a zero rate earns 0, whatever the
    // near-integer guard did.
    let ceiling = if rate < max_rate { 3.0 } else { 4.0 };
    g.clamp(1.0, ceiling) as u8
}

/// Grades for the rates of one query, in input order.
pub fn discretize(rates: &[f64]) -> Vec<u8> {
    let max_rate = rates.iter().copied().fold(0.0f64, f64::max);
    rates.iter().map(|&r| grade(r, max_rate)).collect()
}

pub fn discretize_labels(rates_for_query: &[(DocId, f64)]) -> Vec<(DocId, u8)> {
    let rates: Vec<f64> = rates_for_query.iter().map(|(_, r)| *r).collect();
    rates_for_query
        .iter()
        .zip(discretize(&rates))
        .map(|((d, _), g)| (d.clone(), g))
        .collect()
}

/// Joins the pool with per-pair features and labels every objective.
pub fn build_labeled_dataset(
    pool: &FilteredQueryPool,
    features: &HashMap<(QueryId, DocId), FeatureVector>,
    registry: &FeatureRegistry,
) -> Result<RankingDataset> {
    let mut groups = Vec::with_capacity(pool.queries.len());
    for (qid, records) in &pool.queries {
        let rates = records
            .iter()
            .map(compute_rates)
            .collect::<Result<Vec<_>>>()?;
        let mut labels = vec![Labels::default(); records.len()];
        for objective in Objective::ALL {
            let per_obj: Vec<f64> = rates.iter().map(|r| r.get(objective)).collect();
            for (l, g) in labels.iter_mut().zip(discretize(&per_obj)) {
                l.set(objective, g);
            }
        }
        let instances = records
            .iter()
            .zip(labels)
            .map(|(r, labels)| {
                let fv = features
                    .get(&(r.query_id, r.doc_id.clone()))
                    .ok_or_else(|| {
                        Error::Construction(format!(
                            "no feature vector for ({}, {})",
                            r.query_id, r.doc_id
                        ))
                    })?;
                Ok(RankingInstance {
                    query_id: r.query_id,
                    doc_id: r.doc_id.clone(),
                    features: fv.clone(),
                    labels,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        groups.push(QueryGroup {
            query_id: *qid,
            instances,
        });
    }
    RankingDataset::new(registry.clone(), groups)
}

/// Average over queries of the per-query grade frequencies (each query's
/// frequencies sum to 1).
pub fn label_distribution(dataset: &RankingDataset, objective: Objective) -> Result<[f64; 5]> {
    dataset.require_objective(objective)?;
    let mut acc = [0.0; 5];
    let mut n = 0usize;
    for group in dataset.groups().iter().filter(|g| !g.is_empty()) {
        let grades = group.grades(objective).unwrap_or_default();
        let mut counts = [0usize; 5];
        for g in &grades {
            counts[*g as usize] += 1;
        }
        for (a, c) in acc.iter_mut().zip(counts) {
            *a += c as f64 / grades.len() as f64;
        }
        n += 1;
    }
    if n > 0 {
        for a in &mut acc {
            *a /= n as f64;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(q: u64, d: &str, imp: u64, clicks: u64, atc: u64, orders: u64, rev: f64) -> EngagementRecord {
        EngagementRecord {
            query_id: QueryId(q),
            doc_id: DocId::from(d),
            impressions: imp,
            impressions_top2: 0,
            clicks,
            atc,
            orders,
            revenue: rev,
        }
    }

    #[test]
    fn threshold_boundary() {
        let recs = vec![record(1, "a", 99, 0, 0, 0, 0.0), record(1, "b", 100, 0, 0, 0, 0.0)];
        let pool = filter_low_impressions(&recs, 100).unwrap();
        assert_eq!(pool.queries.len(), 1);
        assert_eq!(pool.queries[0].1.len(), 1);
        assert_eq!(pool.queries[0].1[0].doc_id.as_str(), "b");
    }

    #[test]
    fn empty_and_unchanged_pools() {
        assert!(filter_low_impressions(&[], 100).unwrap().is_empty());
        let recs: Vec<_> = (0..5)
            .map(|i| record(i % 2, &format!("d{i}"), 500, 1, 0, 0, 0.0))
            .collect();
        let pool = filter_low_impressions(&recs, 100).unwrap();
        assert_eq!(pool.num_pairs(), 5);
        assert!(filter_low_impressions(&recs, 0).is_err());
    }

    #[test]
    fn queries_without_survivors_are_dropped() {
        let recs = vec![record(1, "a", 10, 0, 0, 0, 0.0), record(2, "a", 100, 0, 0, 0, 0.0)];
        let pool = filter_low_impressions(&recs, 100).unwrap();
        assert_eq!(pool.queries.len(), 1);
        assert_eq!(pool.queries[0].0, QueryId(2));
    }

    #[test]
    fn rate_formulas() {
        let r = compute_rates(&record(1, "a", 200, 10, 2, 1, 50.0)).unwrap();
        assert_eq!(r.ctr, 0.05);
        assert_eq!(r.atcr, 0.2);
        assert_eq!(r.or, 0.005);
        assert_eq!(r.revr, 0.25);

        let r = compute_rates(&record(1, "a", 200, 0, 0, 0, 0.0)).unwrap();
        assert_eq!(r.atcr, 0.0);
        let r = compute_rates(&record(1, "a", 37, 37, 0, 0, 0.0)).unwrap();
        assert_eq!(r.ctr, 1.0);
        assert!(compute_rates(&record(1, "a", 0, 0, 0, 0, 0.0)).is_err());
    }

    #[test]
    fn discretization_examples() {
        assert_eq!(discretize(&[0.10, 0.05, 0.0]), vec![4, 2, 0]);
        assert_eq!(discretize(&[0.0, 0.0]), vec![0, 0]);
        assert_eq!(discretize(&[0.3, 0.3, 0.01]), vec![4, 4, 1]);
        // 4 * 0.3 / 0.4 is 2.9999999999999996 in floating point; still 3.
        assert_eq!(discretize(&[0.3, 0.4]), vec![3, 4]);
        let labelled = discretize_labels(&[(DocId::from("x"), 1.0), (DocId::from("y"), 0.6)]);
        assert_eq!(labelled[1], (DocId::from("y"), 3));
    }

    #[test]
    fn builds_four_label_dataset() {
        let recs = vec![
            record(1, "a", 200, 10, 2, 1, 50.0),
            record(1, "b", 200, 5, 0, 0, 0.0),
            record(1, "c", 200, 0, 0, 0, 0.0),
        ];
        let pool = filter_low_impressions(&recs, 100).unwrap();
        let registry = FeatureRegistry::anonymous(1);
        let mut feats = HashMap::new();
        for d in ["a", "b", "c"] {
            feats.insert((QueryId(1), DocId::from(d)), FeatureVector::new(vec![1.0]));
        }
        let ds = build_labeled_dataset(&pool, &feats, &registry).unwrap();
        assert_eq!(ds.num_queries(), 1);
        let g = &ds.groups()[0];
        assert_eq!(g.len(), 3);
        assert!(g.instances.iter().all(|i| i.labels.iter().count() == 4));
        assert_eq!(g.grades(Objective::Ctr).unwrap(), vec![4, 2, 0]);
        assert_eq!(g.grades(Objective::Or).unwrap(), vec![4, 0, 0]);

        feats.remove(&(QueryId(1), DocId::from("c")));
        assert!(matches!(
            build_labeled_dataset(&pool, &feats, &registry),
            Err(Error::Construction(_))
        ));
    }

    proptest! {
        #[test]
        fn grade_properties(rates in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..10.0], 1..30),
                            scale in 1e-3f64..1e3) {
            let grades = discretize(&rates);
            let max = rates.iter().copied().fold(0.0, f64::max);
            for (i, (&r, &g)) in rates.iter().zip(&grades).enumerate() {
                if max > 0.0 {
                    prop_assert_eq!(g == 4, r == max, "doc {}", i);
                    prop_assert_eq!(g == 0, r == 0.0, "doc {}", i);
                } else {
                    prop_assert_eq!(g, 0);
                }
                for (&r2, &g2) in rates.iter().zip(&grades) {
                    if r >= r2 {
                        prop_assert!(g >= g2);
                    }
                }
            }
            let scaled: Vec<f64> = rates.iter().map(|r| r * scale).collect();
            prop_assert_eq!(discretize(&scaled), grades);
        }
    }
}
