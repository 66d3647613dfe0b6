//! Regression trees, LambdaMART boosting and random forests.

mod ensemble;
mod forest;
mod lambdamart;
mod tree;

pub use ensemble::{EnsembleMode, TreeEnsemble};
pub use forest::{train_random_forest, RandomForestConfig};
pub use lambdamart::{compute_lambdas, delta_ndcg, train_lambdamart, LambdaMartConfig, LambdaState};
pub use tree::{fit_regression_tree, ColumnMatrix, Node, RegressionTree};
