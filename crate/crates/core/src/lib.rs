//! Learning-to-rank toolkit for e-commerce product search.
//!
//! Engagement logs become graded relevance labels, rankers (LambdaMART,
//! random forests, RankNet and a linear family) are trained on query-grouped
//! feature vectors, and an experiment harness reproduces cross-validated
//! comparisons over a synthetic search-log world.

pub mod baselines;
pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod gbdt;
pub mod harness;
pub mod labels;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
