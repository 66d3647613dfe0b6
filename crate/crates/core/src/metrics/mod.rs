//! Ranking quality (DCG/NDCG@k), paired significance testing and
//! information-gain feature analysis.

mod info_gain;
mod ndcg;
mod wilcoxon;

pub use info_gain::{entropy, equal_frequency_bins, info_gain};
pub use ndcg::{
    dcg_at_k, discount, gain, ideal_dcg_at_k, mean_ndcg, mean_of_scored, ndcg_at_k,
    per_query_ndcg, rank_order, ranked_grades, score_order, Scorer,
};
pub use wilcoxon::{doubled_ranks, wilcoxon_signed_rank, SignificanceResult, EXACT_MAX_N};

/// Cutoff used throughout for NDCG evaluation.
pub const DEFAULT_K: usize = 10;
