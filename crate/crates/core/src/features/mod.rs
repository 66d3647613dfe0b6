//! Query, document and query-document features for product search.

mod bm25f;
mod extract;
mod predictor;
mod selection;

pub use bm25f::{
    bm25f_score, unique_terms, Bm25fIndex, Bm25fParams, CorpusStats, TextField, TextFields,
};
pub use extract::{
    build_registry, FeatureExtractor, ATTRIBUTE_MATCH_PREFIX, BASE_FEATURES, VALUE_MATCH_PREFIX,
};
pub use predictor::{predict_query_attributes, AttributePrediction, AttributeVocabulary, CATEGORY_KEY};
pub use selection::intersection_feature_selection;
