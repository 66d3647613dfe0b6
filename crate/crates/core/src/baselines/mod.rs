//! Pointwise linear rankers and the pairwise RankNet network.

mod linear;
mod ranknet;
mod standardize;

pub use linear::{
    train_linear, LinearConfig, LinearMode, LinearModel, LinearObjective, LinearVariant, Loss,
    Regularizer, SVR_EPSILON,
};
pub use ranknet::{train_ranknet, PairQuery, RankNetConfig, RankNetModel};
pub use standardize::Standardizer;
