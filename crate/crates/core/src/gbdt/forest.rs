use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ensemble::{EnsembleMode, TreeEnsemble};
use super::lambdamart::{check_fraction, min_instances_for, sample_sorted, GroupedRows};
use super::tree::TreeBuilder;
use crate::dataset::{Objective, RankingDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestConfig {
    pub num_trees: usize,
    /// Fraction of queries drawn (without replacement) for each tree.
    pub bag_fraction: f64,
    pub feature_fraction: f64,
    pub num_leaves: usize,
    pub min_instance_percentage_per_leaf: f64,
    pub seed: u64,
}

impl Default for RandomForestConfig {
    fn default() -> Self {
        RandomForestConfig {
            num_trees: 100,
            bag_fraction: 0.5,
            feature_fraction: 0.3,
            num_leaves: 32,
            min_instance_percentage_per_leaf: 0.25,
            seed: 0,
        }
    }
}

impl RandomForestConfig {
    pub fn validate(&self) -> Result<()> {
        check_fraction("forest.bag-fraction", self.bag_fraction)?;
        check_fraction("forest.feature-fraction", self.feature_fraction)?;
        if self.num_leaves < 1 {
            return Err(Error::Config("forest.num-leaves must be at least 1".into()));
        }
        if !(0.0..=100.0).contains(&self.min_instance_percentage_per_leaf) {
            return Err(Error::Config("forest.min-instance-percentage-per-leaf outside [0, 100]".into()));
        }
        Ok(())
    }
}

/// Pointwise regression trees on integer grades, each fit to a random subset
/// of whole queries and features; the forest predicts the mean tree output.
pub fn train_random_forest(
    dataset: &RankingDataset,
    objective: Objective,
    config: &RandomForestConfig,
) -> Result<TreeEnsemble> {
    config.validate()?;
    let data = GroupedRows::new(dataset, objective)?;
    let n = data.matrix.n_rows();
    let n_features = data.matrix.n_cols();
    let mut ensemble = TreeEnsemble::new(EnsembleMode::Bagged, 1.0, n_features)?;
    let targets: Vec<f64> = data.grades.iter().map(|&g| g as f64).collect();
    let ones = vec![1.0; n];
    let min_instances = min_instances_for(config.min_instance_percentage_per_leaf, n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut builder = TreeBuilder::new(&data.matrix);
    for _ in 0..config.num_trees {
        let queries = sample_sorted(&mut rng, data.num_queries(), config.bag_fraction);
        let features = if n_features == 0 {
            Vec::new()
        } else {
            sample_sorted(&mut rng, n_features, config.feature_fraction)
        };
        let rows: Vec<usize> = queries.iter().flat_map(|&q| data.query_rows(q)).collect();
        let tree = builder.fit(&rows, &targets, &ones, config.num_leaves, min_instances, &features);
        ensemble.push(tree)?;
    }
    Ok(ensemble)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::lambdamart::tests::toy_dataset;
    use crate::gbdt::tree::{fit_regression_tree, ColumnMatrix};

    #[test]
    fn one_full_tree_equals_single_fit() {
        let ds = toy_dataset(10, 12, 5);
        let config = RandomForestConfig {
            num_trees: 1,
            bag_fraction: 1.0,
            feature_fraction: 1.0,
            num_leaves: 8,
            min_instance_percentage_per_leaf: 1.0,
            seed: 1,
        };
        let forest = train_random_forest(&ds, Objective::Ctr, &config).unwrap();
        let m = ColumnMatrix::from_dataset(&ds);
        let grades: Vec<f64> = ds
            .groups()
            .iter()
            .flat_map(|g| g.grades(Objective::Ctr).unwrap())
            .map(f64::from)
            .collect();
        let rows: Vec<usize> = (0..m.n_rows()).collect();
        let mut tree = fit_regression_tree(&m, &rows, &grades, &vec![1.0; m.n_rows()], 8, 2, &[0, 1, 2, 3, 4]).unwrap();
        tree.map_leaves(|_, v| crate::dataset::round_sig9(v));
        assert_eq!(forest.trees(), &[tree]);
        for g in ds.groups() {
            for i in &g.instances {
                assert_eq!(
                    forest.predict(i.features.values()).unwrap(),
                    forest.trees()[0].evaluate(i.features.values())
                );
            }
        }
    }

    #[test]
    fn deterministic() {
        let ds = toy_dataset(12, 10, 6);
        let config = RandomForestConfig {
            num_trees: 10,
            seed: 3,
            ..Default::default()
        };
        let a = train_random_forest(&ds, Objective::Ctr, &config).unwrap();
        let b = train_random_forest(&ds, Objective::Ctr, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
    }
}
