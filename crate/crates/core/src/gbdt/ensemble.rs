use super::tree::RegressionTree;
use crate::dataset::round_sig9;
use crate::error::{Error, Result};
use crate::metrics::Scorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleMode {
    Boosted,
    Bagged,
}

impl EnsembleMode {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleMode::Boosted => "boosted",
            EnsembleMode::Bagged => "bagged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    trees: Vec<RegressionTree>,
    learning_rate: f64,
    mode: EnsembleMode,
    num_features: usize,
}

impl TreeEnsemble {
    pub fn new(mode: EnsembleMode, learning_rate: f64, num_features: usize) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning rate {learning_rate} outside (0, 1]"
            )));
        }
        Ok(TreeEnsemble {
            trees: Vec::new(),
            learning_rate,
            mode,
            num_features,
        })
    }

    /// Appends a tree, rounding its leaf values to the stored precision.
    pub fn push(&mut self, mut tree: RegressionTree) -> Result<()> {
        if tree.max_feature_id() as usize > self.num_features {
            return Err(Error::Dimension {
                expected: self.num_features,
                found: tree.max_feature_id() as usize,
            });
        }
        tree.map_leaves(|_, v| round_sig9(v));
        self.trees.push(tree);
        Ok(())
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn mode(&self) -> EnsembleMode {
        self.mode
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Keeps only the first `n` trees.
    pub fn truncate(&mut self, n: usize) {
        self.trees.truncate(n);
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.num_features {
            return Err(Error::Dimension {
                expected: self.num_features,
                found: features.len(),
            });
        }
        Ok(self.predict_unchecked(features))
    }

    pub fn predict_unchecked(&self, features: &[f64]) -> f64 {
        match self.mode {
            EnsembleMode::Boosted => {
                let mut s = 0.0;
                for t in &self.trees {
                    s += self.learning_rate * t.evaluate(features);
                }
                s
            }
            EnsembleMode::Bagged => {
                if self.trees.is_empty() {
                    return 0.0;
                }
                let s: f64 = self.trees.iter().map(|t| t.evaluate(features)).sum();
                s / self.trees.len() as f64
            }
        }
    }
}

impl Scorer for TreeEnsemble {
    fn score(&self, features: &[f64]) -> f64 {
        self.predict_unchecked(features)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::tree::Node;

    fn stump(feature: u32, threshold: f64, l: f64, r: f64) -> RegressionTree {
        RegressionTree::from_nodes(vec![
            Node::Split {
                feature,
                threshold,
                left: 1,
                right: 2,
            },
            Node::Leaf { value: l },
            Node::Leaf { value: r },
        ])
        .unwrap()
    }

    #[test]
    fn empty_and_single_leaf() {
        let mut e = TreeEnsemble::new(EnsembleMode::Boosted, 0.05, 3).unwrap();
        assert_eq!(e.predict(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        e.push(RegressionTree::leaf(2.0)).unwrap();
        assert_eq!(e.predict(&[1.0, 2.0, 3.0]).unwrap(), 0.05 * 2.0);
        assert!(e.predict(&[1.0]).is_err());
    }

    #[test]
    fn hand_traversal() {
        let mut e = TreeEnsemble::new(EnsembleMode::Boosted, 0.5, 2).unwrap();
        e.push(stump(1, 0.5, -1.0, 3.0)).unwrap();
        e.push(stump(2, 10.0, 4.0, 8.0)).unwrap();
        // x = (0.7, 10): tree 1 goes right (3), tree 2 goes left (4).
        assert_eq!(e.predict(&[0.7, 10.0]).unwrap(), 0.5 * 3.0 + 0.5 * 4.0);
        // x = (0.5, 11): left (-1), right (8).
        assert_eq!(e.predict(&[0.5, 11.0]).unwrap(), 0.5 * -1.0 + 0.5 * 8.0);

        let mut b = TreeEnsemble::new(EnsembleMode::Bagged, 1.0, 2).unwrap();
        b.push(stump(1, 0.5, -1.0, 3.0)).unwrap();
        b.push(stump(2, 10.0, 4.0, 8.0)).unwrap();
        assert_eq!(b.predict(&[0.7, 10.0]).unwrap(), 3.5);
    }

    #[test]
    fn rejects_out_of_range_features() {
        let mut e = TreeEnsemble::new(EnsembleMode::Boosted, 0.1, 1).unwrap();
        assert!(e.push(stump(2, 0.0, 0.0, 1.0)).is_err());
        assert!(TreeEnsemble::new(EnsembleMode::Boosted, 0.0, 1).is_err());
    }
}
