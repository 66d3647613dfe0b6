//! End-to-end assembly: world and engagement log to a labeled dataset.

use std::collections::HashMap;

use crate::dataset::{
    DocId, EngagementRecord, FeatureRegistry, FeatureVector, Labels, QueryGroup, QueryId, RankingDataset, RankingInstance,
};
use crate::error::{Error, Result};
use crate::features::{
    build_registry, predict_query_attributes, AttributeVocabulary, Bm25fParams, CorpusStats, FeatureExtractor,
};
use crate::labels::{build_labeled_dataset, filter_low_impressions};
use crate::synth::{derive_seed, SyntheticWorld};

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizeConfig {
    pub predictor_accuracy: f64,
    pub bm25f: Bm25fParams,
}

impl Default for FeaturizeConfig {
    fn default() -> Self {
        FeaturizeConfig {
            predictor_accuracy: 0.9,
            bm25f: Bm25fParams::default(),
        }
    }
}

/// Feature vectors keyed by (query, document), with their registry.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub registry: FeatureRegistry,
    pub vectors: HashMap<(QueryId, DocId), FeatureVector>,
}

impl FeatureTable {
    /// Unlabeled dataset over the logged pairs, queries in first-seen order.
    pub fn to_dataset(&self, records: &[EngagementRecord]) -> Result<RankingDataset> {
        let mut order: Vec<QueryId> = Vec::new();
        let mut groups: HashMap<QueryId, Vec<RankingInstance>> = HashMap::new();
        for r in records {
            let features = self
                .vectors
                .get(&(r.query_id, r.doc_id.clone()))
                .ok_or_else(|| Error::Construction(format!("no features for ({}, {})", r.query_id, r.doc_id)))?;
            groups
                .entry(r.query_id)
                .or_insert_with(|| {
                    order.push(r.query_id);
                    Vec::new()
                })
                .push(RankingInstance {
                    query_id: r.query_id,
                    doc_id: r.doc_id.clone(),
                    features: features.clone(),
                    labels: Labels::default(),
                });
        }
        let groups = order
            .into_iter()
            .map(|q| QueryGroup {
                query_id: q,
                instances: groups.remove(&q).unwrap_or_default(),
            })
            .collect();
        RankingDataset::new(self.registry.clone(), groups)
    }
}

/// Extracts features for every logged pair.
pub fn featurize(
    world: &SyntheticWorld,
    records: &[EngagementRecord],
    config: &FeaturizeConfig,
) -> Result<FeatureTable> {
    if !(0.0..=1.0).contains(&config.predictor_accuracy) {
        return Err(Error::Config(format!(
            "predictor accuracy {} outside [0, 1]",
            config.predictor_accuracy
        )));
    }
    let vocabulary = AttributeVocabulary::from_catalog(&world.catalog);
    let registry = build_registry(&vocabulary)?;
    let stats = CorpusStats::from_documents(world.catalog.iter().map(|p| &p.text_fields));
    let extractor = FeatureExtractor::new(registry.clone(), stats, config.bm25f.clone())?;
    let products = world.product_index();
    let queries = world.query_index();
    let predictor_seed = derive_seed(world.seed, 5);
    let mut predictions = HashMap::new();
    let mut vectors = HashMap::with_capacity(records.len());
    for r in records {
        let q = queries
            .get(&r.query_id)
            .ok_or_else(|| Error::Precondition(format!("unknown query {}", r.query_id)))?;
        let p = products
            .get(&r.doc_id)
            .ok_or_else(|| Error::Precondition(format!("unknown product {}", r.doc_id)))?;
        let preds = predictions
            .entry(r.query_id)
            .or_insert_with(|| predict_query_attributes(q, &vocabulary, config.predictor_accuracy, predictor_seed));
        vectors.insert((r.query_id, r.doc_id.clone()), extractor.extract(&q.text, preds, p));
    }
    Ok(FeatureTable { registry, vectors })
}

/// Labeled benchmark plus the department of every query.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub dataset: RankingDataset,
    pub departments: HashMap<QueryId, String>,
}

/// Simulates the world's log, filters it at `impression_threshold`, extracts
/// features and labels all four objectives.
pub fn build_benchmark(world: &SyntheticWorld, config: &FeaturizeConfig, impression_threshold: u64) -> Result<Benchmark> {
    let records = world.simulate();
    benchmark_from_log(world, &records, config, impression_threshold)
}

pub fn benchmark_from_log(
    world: &SyntheticWorld,
    records: &[EngagementRecord],
    config: &FeaturizeConfig,
    impression_threshold: u64,
) -> Result<Benchmark> {
    let pool = filter_low_impressions(records, impression_threshold)?;
    let kept: Vec<EngagementRecord> = pool.queries.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    let table = featurize(world, &kept, config)?;
    let dataset = build_labeled_dataset(&pool, &table.vectors, &table.registry)?;
    let departments = world
        .queries
        .iter()
        .map(|q| (q.query_id, q.department.clone()))
        .collect();
    Ok(Benchmark { dataset, departments })
}
