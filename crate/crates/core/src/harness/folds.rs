use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{QueryId, RankingDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: BTreeMap<QueryId, usize>,
}

impl FoldAssignment {
    pub fn test_queries(&self, fold: usize) -> HashSet<QueryId> {
        self.folds.iter().filter(|(_, &f)| f == fold).map(|(q, _)| *q).collect()
    }

    /// `(train, test)` for one fold.
    pub fn split(&self, dataset: &RankingDataset, fold: usize) -> (RankingDataset, RankingDataset) {
        let test = self.test_queries(fold);
        (
            dataset.filter_queries(|q| !test.contains(&q)),
            dataset.filter_queries(|q| test.contains(&q)),
        )
    }

    /// `query_id,fold` lines sorted by query id.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("query_id,fold\n");
        for (q, f) in &self.folds {
            out.push_str(&format!("{q},{f}\n"));
        }
        out
    }
}

/// Shuffles query ids with `seed` and deals them round-robin into `k` folds.
pub fn kfold_split(dataset: &RankingDataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k == 0 {
        return Err(Error::Config("fold count must be positive".into()));
    }
    let mut ids = dataset.query_ids();
    if ids.len() < k {
        return Err(Error::Precondition(format!(
            "{} queries cannot fill {k} folds",
            ids.len()
        )));
    }
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let folds = ids.into_iter().enumerate().map(|(i, q)| (q, i % k)).collect();
    Ok(FoldAssignment { k, folds })
}
