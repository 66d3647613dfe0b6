use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ensemble::{EnsembleMode, TreeEnsemble};
use super::tree::{ColumnMatrix, TreeBuilder};
use crate::dataset::{Objective, RankingDataset};
use crate::error::{Error, Result};
use crate::metrics::{discount, gain, ideal_dcg_at_k};

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaMartConfig {
    pub num_leaves: usize,
    /// Percent (not fraction) of training instances each leaf must hold.
    pub min_instance_percentage_per_leaf: f64,
    pub learning_rate: f64,
    pub sub_sampling: f64,
    pub feature_sampling: f64,
    pub num_trees: usize,
    pub truncation_k: usize,
    pub seed: u64,
}

impl Default for LambdaMartConfig {
    fn default() -> Self {
        LambdaMartConfig {
            num_leaves: 7,
            min_instance_percentage_per_leaf: 0.25,
            learning_rate: 0.05,
            sub_sampling: 0.3,
            feature_sampling: 0.3,
            num_trees: 2000,
            truncation_k: 10,
            seed: 0,
        }
    }
}

impl LambdaMartConfig {
    pub fn validate(&self) -> Result<()> {
        check_fraction("boosting.learning-rate", self.learning_rate)?;
        check_fraction("boosting.sub-sampling", self.sub_sampling)?;
        check_fraction("trees.feature-sampling", self.feature_sampling)?;
        if self.num_leaves < 1 {
            return Err(Error::Config("trees.num-leaves must be at least 1".into()));
        }
        if self.truncation_k < 1 {
            return Err(Error::Config("truncation must be at least 1".into()));
        }
        let p = self.min_instance_percentage_per_leaf;
        if !(0.0..=100.0).contains(&p) {
            return Err(Error::Config(format!(
                "trees.min-instance-percentage-per-leaf {p} outside [0, 100]"
            )));
        }
        Ok(())
    }

    /// Smallest leaf size for a training set of `n` instances.
    pub fn min_instances(&self, n: usize) -> usize {
        min_instances_for(self.min_instance_percentage_per_leaf, n)
    }
}

pub(crate) fn min_instances_for(percentage: f64, n: usize) -> usize {
    ((percentage / 100.0 * n as f64 - 1e-9).ceil() as usize).max(1)
}

pub(crate) fn check_fraction(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} outside (0, 1]")))
    }
}

/// Per-document pseudo-gradients and second-order weights for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaState {
    pub lambdas: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Lambdas for one query. Positive lambdas push a document up.
pub fn compute_lambdas(scores: &[f64], grades: &[u8], truncation_k: usize) -> Result<LambdaState> {
    if scores.len() != grades.len() {
        return Err(Error::Dimension {
            expected: grades.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Precondition("scores must be finite".into()));
    }
    let mut state = LambdaState {
        lambdas: vec![0.0; scores.len()],
        weights: vec![0.0; scores.len()],
    };
    let mut scratch = Vec::new();
    lambdas_into(
        scores,
        grades,
        truncation_k,
        &mut state.lambdas,
        &mut state.weights,
        &mut scratch,
    );
    Ok(state)
}

/// `|ΔNDCG@k|` from swapping the documents at 1-based ranks `ri` and `rj`.
pub fn delta_ndcg(gi: u8, gj: u8, ri: usize, rj: usize, k: usize, ideal: f64) -> f64 {
    let d = |r: usize| if r <= k { discount(r) } else { 0.0 };
    ((gain(gi) - gain(gj)) * (d(ri) - d(rj))).abs() / ideal
}

pub(crate) fn lambdas_into(
    scores: &[f64],
    grades: &[u8],
    k: usize,
    lambdas: &mut [f64],
    weights: &mut [f64],
    scratch: &mut Vec<usize>,
) {
    let n = scores.len();
    lambdas.iter_mut().for_each(|l| *l = 0.0);
    weights.iter_mut().for_each(|w| *w = 0.0);
    if n < 2 {
        return;
    }
    let ideal = ideal_dcg_at_k(grades, k);
    if ideal <= 0.0 {
        return;
    }
    scratch.clear();
    scratch.extend(0..n);
    scratch.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    // Pairs with both ranks beyond k have zero delta; visit each other pair
    // once through its better-ranked member.
    let top = k.min(n);
    let disc: Vec<f64> = (1..=top).map(discount).collect();
    for pa in 0..top {
        let a = scratch[pa];
        for pb in pa + 1..n {
            let b = scratch[pb];
            let (i, j) = match grades[a].cmp(&grades[b]) {
                std::cmp::Ordering::Greater => (a, b),
                std::cmp::Ordering::Less => (b, a),
                std::cmp::Ordering::Equal => continue,
            };
            let db = if pb < top { disc[pb] } else { 0.0 };
            let delta = ((gain(grades[i]) - gain(grades[j])) * (disc[pa] - db)).abs() / ideal;
            let rho = 1.0 / (1.0 + (scores[i] - scores[j]).exp());
            let l = rho * delta;
            let w = rho * (1.0 - rho) * delta;
            lambdas[i] += l;
            lambdas[j] -= l;
            weights[i] += w;
            weights[j] += w;
        }
    }
}

/// Flattened training rows with per-query offsets and grades for one objective.
pub(crate) struct GroupedRows {
    pub matrix: ColumnMatrix,
    pub offsets: Vec<usize>,
    pub grades: Vec<u8>,
}

impl GroupedRows {
    pub fn new(dataset: &RankingDataset, objective: Objective) -> Result<Self> {
        if dataset.is_empty() || dataset.num_instances() == 0 {
            return Err(Error::Training("empty training set".into()));
        }
        dataset.require_objective(objective)?;
        let mut offsets = vec![0];
        let mut grades = Vec::with_capacity(dataset.num_instances());
        for g in dataset.groups() {
            grades.extend(g.grades(objective).expect("objective checked"));
            offsets.push(grades.len());
        }
        Ok(GroupedRows {
            matrix: ColumnMatrix::from_dataset(dataset),
            offsets,
            grades,
        })
    }

    pub fn num_queries(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn query_rows(&self, q: usize) -> std::ops::Range<usize> {
        self.offsets[q]..self.offsets[q + 1]
    }
}

pub(crate) fn sample_sorted(rng: &mut ChaCha8Rng, n: usize, fraction: f64) -> Vec<usize> {
    let k = ((fraction * n as f64).ceil() as usize).clamp(1, n.max(1)).min(n);
    let mut picked = sample(rng, n, k).into_vec();
    picked.sort_unstable();
    picked
}

pub fn train_lambdamart(
    dataset: &RankingDataset,
    objective: Objective,
    config: &LambdaMartConfig,
) -> Result<TreeEnsemble> {
    config.validate()?;
    let data = GroupedRows::new(dataset, objective)?;
    let n = data.matrix.n_rows();
    let n_features = data.matrix.n_cols();
    let mut ensemble = TreeEnsemble::new(EnsembleMode::Boosted, config.learning_rate, n_features)?;
    if config.num_trees == 0 {
        return Ok(ensemble);
    }
    let min_instances = config.min_instances(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut builder = TreeBuilder::new(&data.matrix);
    let mut scores = vec![0.0; n];
    let mut lambdas = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let ones = vec![1.0; n];
    let mut scratch = Vec::new();
    let mut rows = Vec::with_capacity(n);

    for _ in 0..config.num_trees {
        let queries = sample_sorted(&mut rng, data.num_queries(), config.sub_sampling);
        let features = if n_features == 0 {
            Vec::new()
        } else {
            sample_sorted(&mut rng, n_features, config.feature_sampling)
        };
        rows.clear();
        for &q in &queries {
            let r = data.query_rows(q);
            lambdas_into(
                &scores[r.clone()],
                &data.grades[r.clone()],
                config.truncation_k,
                &mut lambdas[r.clone()],
                &mut weights[r.clone()],
                &mut scratch,
            );
            rows.extend(r);
        }
        let mut tree = builder.fit(&rows, &lambdas, &ones, config.num_leaves, min_instances, &features);

        // One Newton step per leaf.
        let mut num = vec![0.0; tree.nodes().len()];
        let mut den = vec![0.0; tree.nodes().len()];
        for &r in &rows {
            let leaf = tree.leaf_of_row(&data.matrix, r);
            num[leaf] += lambdas[r];
            den[leaf] += weights[r];
        }
        tree.map_leaves(|i, _| if den[i] > 0.0 { num[i] / den[i] } else { 0.0 });
        ensemble.push(tree)?;
        let tree = ensemble.trees().last().expect("just pushed");
        for (r, s) in scores.iter_mut().enumerate() {
            *s += config.learning_rate * tree.evaluate_row(&data.matrix, r);
        }
    }
    Ok(ensemble)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dataset::{DocId, FeatureRegistry, FeatureVector, Labels, QueryGroup, QueryId, RankingInstance};
    use crate::metrics::mean_ndcg;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn single_document_has_zero_lambda() {
        let s = compute_lambdas(&[0.3], &[4], 10).unwrap();
        assert_eq!(s.lambdas, vec![0.0]);
        assert_eq!(s.weights, vec![0.0]);
    }

    #[test]
    fn two_documents_equal_scores() {
        let s = compute_lambdas(&[0.0, 0.0], &[1, 0], 10).unwrap();
        assert!(s.lambdas[0] > 0.0);
        assert_eq!(s.lambdas[1], -s.lambdas[0]);
        // rho = 1/2, |ΔNDCG| = 1 - 1/log2(3) when the relevant doc leads.
        let delta = 1.0 - 1.0 / 3f64.log2();
        assert!((s.lambdas[0] - 0.5 * delta).abs() < 1e-15);
        assert!((s.weights[0] - 0.25 * delta).abs() < 1e-15);
    }

    #[test]
    fn matches_finite_difference_of_weighted_pairwise_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let scores: [f64; 2] = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let grades = [rng.random_range(0..=4u8), rng.random_range(0..=4u8)];
            if grades[0] == grades[1] || (scores[0] - scores[1]).abs() < 1e-3 {
                continue;
            }
            let state = compute_lambdas(&scores, &grades, 10).unwrap();
            let (hi, lo) = if grades[0] > grades[1] { (0, 1) } else { (1, 0) };
            let rank = |s: &[f64; 2], i: usize| if s[i] > s[1 - i] { 1 } else { 2 };
            let ideal = ideal_dcg_at_k(&grades, 10);
            let delta = delta_ndcg(grades[hi], grades[lo], rank(&scores, hi), rank(&scores, lo), 10, ideal);
            let cost = |s: &[f64; 2]| delta * (1.0 + (-(s[hi] - s[lo])).exp()).ln();
            let h = 1e-6;
            for i in 0..2 {
                let mut up = scores;
                let mut down = scores;
                up[i] += h;
                down[i] -= h;
                let fd = -(cost(&up) - cost(&down)) / (2.0 * h);
                let rel = (fd - state.lambdas[i]).abs() / state.lambdas[i].abs().max(1e-12);
                assert!(rel < 1e-6, "fd {fd} vs {}", state.lambdas[i]);
            }
        }
    }

    proptest! {
        #[test]
        fn lambdas_sum_to_zero(pairs in prop::collection::vec((-5.0f64..5.0, 0u8..=4), 1..40), k in 1usize..15) {
            let (scores, grades): (Vec<f64>, Vec<u8>) = pairs.into_iter().unzip();
            let s = compute_lambdas(&scores, &grades, k).unwrap();
            prop_assert!(s.lambdas.iter().sum::<f64>().abs() < 1e-9);
            prop_assert!(s.weights.iter().all(|w| *w >= 0.0 && w.is_finite()));
        }
    }

    pub(crate) fn toy_dataset(queries: usize, docs: usize, seed: u64) -> RankingDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups = (0..queries)
            .map(|q| QueryGroup {
                query_id: QueryId(q as u64),
                instances: (0..docs)
                    .map(|d| {
                        let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
                        let utility = 0.6 * x[0] + 0.3 * x[1] + 0.1 * rng.random::<f64>();
                        let grade = (utility * 5.0).floor().min(4.0) as u8;
                        RankingInstance {
                            query_id: QueryId(q as u64),
                            doc_id: DocId(format!("q{q}d{d}")),
                            features: FeatureVector::new(x),
                            labels: Labels::single(Objective::Ctr, grade),
                        }
                    })
                    .collect(),
            })
            .collect();
        RankingDataset::new(FeatureRegistry::anonymous(5), groups).unwrap()
    }

    fn small_config(trees: usize) -> LambdaMartConfig {
        LambdaMartConfig {
            num_trees: trees,
            seed: 9,
            ..Default::default()
        }
    }

    #[test]
    fn zero_trees_scores_zero() {
        let ds = toy_dataset(4, 10, 1);
        let e = train_lambdamart(&ds, Objective::Ctr, &small_config(0)).unwrap();
        assert!(e.is_empty());
        assert_eq!(e.predict(&[1.0; 5]).unwrap(), 0.0);
        assert!(train_lambdamart(&ds, Objective::Or, &small_config(1)).is_err());
    }

    #[test]
    fn deterministic_and_improving() {
        let ds = toy_dataset(40, 30, 2);
        let a = train_lambdamart(&ds, Objective::Ctr, &small_config(200)).unwrap();
        let b = train_lambdamart(&ds, Objective::Ctr, &small_config(200)).unwrap();
        assert_eq!(a, b);
        let mut early = a.clone();
        early.truncate(10);
        let full = mean_ndcg(&a, &ds, Objective::Ctr, 10).unwrap();
        let first = mean_ndcg(&early, &ds, Objective::Ctr, 10).unwrap();
        assert!(full >= first, "{full} < {first}");
        assert!(full > 0.85, "{full}");
    }

    #[test]
    fn leaves_respect_min_instances() {
        let ds = toy_dataset(30, 40, 3);
        let config = LambdaMartConfig {
            min_instance_percentage_per_leaf: 2.0,
            sub_sampling: 1.0,
            ..small_config(20)
        };
        let e = train_lambdamart(&ds, Objective::Ctr, &config).unwrap();
        let min = config.min_instances(ds.num_instances());
        assert_eq!(min, 24);
        for t in e.trees() {
            let mut counts = std::collections::HashMap::new();
            for g in ds.groups() {
                for i in &g.instances {
                    *counts.entry(t.leaf_index(i.features.values())).or_insert(0usize) += 1;
                }
            }
            assert!(counts.values().all(|&c| c >= min));
            assert!(t.num_leaves() <= 7);
        }
    }

    #[test]
    fn monotone_score_transform_keeps_ndcg() {
        let ds = toy_dataset(20, 15, 4);
        let e = train_lambdamart(&ds, Objective::Ctr, &small_config(30)).unwrap();
        let base = mean_ndcg(&e, &ds, Objective::Ctr, 10).unwrap();
        let warped = |x: &[f64]| (3.0 * e.predict_unchecked(x)).exp() + 7.0;
        assert_eq!(mean_ndcg(&warped, &ds, Objective::Ctr, 10).unwrap(), base);
    }

    #[test]
    fn config_validation() {
        assert!(LambdaMartConfig { sub_sampling: 0.0, ..Default::default() }.validate().is_err());
        assert!(LambdaMartConfig { learning_rate: 1.5, ..Default::default() }.validate().is_err());
        assert_eq!(LambdaMartConfig::default().min_instances(40_000), 100);
        assert_eq!(LambdaMartConfig::default().min_instances(10), 1);
    }
}
