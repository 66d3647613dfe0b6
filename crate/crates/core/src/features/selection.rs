use crate::dataset::RankingDataset;
use crate::error::{Error, Result};

/// Feature ids to train on for a test segment: every non-attribute feature
/// plus each attribute feature nonzero on at least `max(1, ceil(min_support *
/// n))` of the `n` test instances. Ascending ids of the shared registry.
pub fn intersection_feature_selection(
    train: &RankingDataset,
    test: &RankingDataset,
    min_support: f64,
) -> Result<Vec<u32>> {
    if train.registry() != test.registry() {
        return Err(Error::RegistryMismatch {
            expected: train.num_features(),
            found: test.num_features(),
        });
    }
    let n = test.num_instances();
    if n == 0 {
        return Err(Error::Precondition("intersection selection needs a nonempty test set".into()));
    }
    if !(0.0..=1.0).contains(&min_support) {
        return Err(Error::Config(format!("min support {min_support} outside [0, 1]")));
    }
    let needed = ((min_support * n as f64 - 1e-9).ceil() as usize).max(1);
    let mut support = vec![0usize; test.num_features()];
    for g in test.groups() {
        for inst in &g.instances {
            for (s, v) in support.iter_mut().zip(inst.features.values()) {
                *s += (*v != 0.0) as usize;
            }
        }
    }
    Ok(test
        .registry()
        .entries()
        .iter()
        .filter(|e| e.attribute_key.is_none() || support[e.id as usize - 1] >= needed)
        .map(|e| e.id)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{
        DocId, FeatureGroup, FeatureRegistry, FeatureVector, Labels, QueryGroup, QueryId, RankingInstance,
    };

    fn registry() -> FeatureRegistry {
        let mut r = FeatureRegistry::default();
        r.push("bm25f", FeatureGroup::QueryDocument, None, false).unwrap();
        for key in ["color", "size", "wattage"] {
            r.push(format!("am:{key}"), FeatureGroup::QueryDocument, Some(key.into()), false).unwrap();
        }
        r
    }

    fn dataset(rows: &[[f64; 4]]) -> RankingDataset {
        let instances = rows
            .iter()
            .enumerate()
            .map(|(i, r)| RankingInstance {
                query_id: QueryId(1),
                doc_id: DocId(format!("d{i}")),
                features: FeatureVector::new(r.to_vec()),
                labels: Labels::default(),
            })
            .collect();
        RankingDataset::new(
            registry(),
            vec![QueryGroup {
                query_id: QueryId(1),
                instances,
            }],
        )
        .unwrap()
    }

    #[test]
    fn drops_attributes_absent_from_test() {
        let train = dataset(&[[1.0, 0.5, 0.5, 0.9]]);
        let test = dataset(&[[2.0, 0.5, 0.0, 0.0], [0.0, 0.0, 0.7, 0.0]]);
        assert_eq!(intersection_feature_selection(&train, &test, 0.0).unwrap(), [1, 2, 3]);
        // Idempotent under re-selection on the projected data.
        let ids = intersection_feature_selection(&train, &test, 0.0).unwrap();
        let (ptrain, ptest) = (train.project(&ids).unwrap(), test.project(&ids).unwrap());
        assert_eq!(intersection_feature_selection(&ptrain, &ptest, 0.0).unwrap(), [1, 2, 3]);
    }

    #[test]
    fn identity_and_disjoint_boundaries() {
        let all = dataset(&[[1.0, 0.1, 0.2, 0.3]]);
        assert_eq!(intersection_feature_selection(&all, &all, 0.0).unwrap(), [1, 2, 3, 4]);
        let none = dataset(&[[1.0, 0.0, 0.0, 0.0]]);
        assert_eq!(intersection_feature_selection(&all, &none, 0.0).unwrap(), [1]);
    }

    #[test]
    fn support_threshold_and_errors() {
        let test = dataset(&[[1.0, 0.5, 0.0, 0.0], [1.0, 0.5, 0.5, 0.0], [1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]]);
        assert_eq!(intersection_feature_selection(&test, &test, 0.5).unwrap(), [1, 2]);
        let empty = RankingDataset::empty(registry());
        assert!(intersection_feature_selection(&test, &empty, 0.0).is_err());
        let other = RankingDataset::empty(FeatureRegistry::anonymous(4));
        assert!(intersection_feature_selection(&other, &test, 0.0).is_err());
    }
}
