use std::collections::HashMap;

use super::bm25f::{bm25f_score, Bm25fParams, CorpusStats, TextField};
use super::predictor::{AttributePrediction, AttributeVocabulary, CATEGORY_KEY};
use crate::dataset::{FeatureEntry, FeatureGroup, FeatureRegistry, FeatureVector};
use crate::error::{Error, Result};
use crate::synth::SyntheticProduct;

pub const ATTRIBUTE_MATCH_PREFIX: &str = "am:";
pub const VALUE_MATCH_PREFIX: &str = "avm:";

/// Fixed features ahead of the attribute block: (name, group, popularity).
pub const BASE_FEATURES: [(&str, FeatureGroup, bool); 11] = [
    ("query_length", FeatureGroup::Query, false),
    ("num_predicted_attributes", FeatureGroup::Query, false),
    ("title_length", FeatureGroup::Document, false),
    ("price", FeatureGroup::Document, false),
    ("sales_count", FeatureGroup::Document, true),
    ("rating", FeatureGroup::Document, true),
    ("review_count", FeatureGroup::Document, true),
    ("bm25f", FeatureGroup::QueryDocument, false),
    ("bm25f_title", FeatureGroup::QueryDocument, false),
    ("bm25f_description", FeatureGroup::QueryDocument, false),
    ("bm25f_brand", FeatureGroup::QueryDocument, false),
];

#[derive(Debug, Clone, PartialEq)]
enum FeatureKind {
    QueryLength,
    NumPredictedAttributes,
    TitleLength,
    Price,
    SalesCount,
    Rating,
    ReviewCount,
    Bm25f,
    Bm25fField(TextField),
    AttributeMatch(String),
    ValueMatch(String),
}

impl FeatureKind {
    fn parse(name: &str, attribute_key: Option<&str>) -> Result<Self> {
        let kind = match name {
            "query_length" => FeatureKind::QueryLength,
            "num_predicted_attributes" => FeatureKind::NumPredictedAttributes,
            "title_length" => FeatureKind::TitleLength,
            "price" => FeatureKind::Price,
            "sales_count" => FeatureKind::SalesCount,
            "rating" => FeatureKind::Rating,
            "review_count" => FeatureKind::ReviewCount,
            "bm25f" => FeatureKind::Bm25f,
            "bm25f_title" => FeatureKind::Bm25fField(TextField::Title),
            "bm25f_description" => FeatureKind::Bm25fField(TextField::Description),
            "bm25f_brand" => FeatureKind::Bm25fField(TextField::Brand),
            _ => {
                let (key, kind) = if let Some(k) = name.strip_prefix(VALUE_MATCH_PREFIX) {
                    (k, FeatureKind::ValueMatch(k.to_string()))
                } else if let Some(k) = name.strip_prefix(ATTRIBUTE_MATCH_PREFIX) {
                    (k, FeatureKind::AttributeMatch(k.to_string()))
                } else {
                    return Err(Error::Registry(format!("no extractor for feature `{name}`")));
                };
                if attribute_key != Some(key) {
                    return Err(Error::Registry(format!("feature `{name}` must carry attribute key `{key}`")));
                }
                return Ok(kind);
            }
        };
        if attribute_key.is_some() {
            return Err(Error::Registry(format!("feature `{name}` takes no attribute key")));
        }
        Ok(kind)
    }
}

/// Base features, then `am:`/`avm:` pairs for the category and for every
/// catalog attribute key in sorted order.
pub fn build_registry(vocabulary: &AttributeVocabulary) -> Result<FeatureRegistry> {
    let mut entries: Vec<FeatureEntry> = BASE_FEATURES
        .iter()
        .enumerate()
        .map(|(i, &(name, group, popularity))| FeatureEntry {
            id: i as u32 + 1,
            name: name.to_string(),
            group,
            attribute_key: None,
            popularity,
        })
        .collect();
    let mut keys = vec![CATEGORY_KEY];
    keys.extend(vocabulary.keys());
    for key in keys {
        for prefix in [ATTRIBUTE_MATCH_PREFIX, VALUE_MATCH_PREFIX] {
            entries.push(FeatureEntry {
                id: entries.len() as u32 + 1,
                name: format!("{prefix}{key}"),
                group: FeatureGroup::QueryDocument,
                attribute_key: Some(key.to_string()),
                popularity: false,
            });
        }
    }
    FeatureRegistry::new(entries)
}

/// Registry-driven extractor with frozen corpus statistics.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    registry: FeatureRegistry,
    kinds: Vec<FeatureKind>,
    /// Attribute key to the (position, is value match) of its features.
    by_key: HashMap<String, Vec<(usize, bool)>>,
    stats: CorpusStats,
    params: Bm25fParams,
}

impl FeatureExtractor {
    pub fn new(registry: FeatureRegistry, stats: CorpusStats, params: Bm25fParams) -> Result<Self> {
        params.validate()?;
        let kinds = registry
            .entries()
            .iter()
            .map(|e| FeatureKind::parse(&e.name, e.attribute_key.as_deref()))
            .collect::<Result<Vec<_>>>()?;
        let mut by_key: HashMap<String, Vec<(usize, bool)>> = HashMap::new();
        for (i, kind) in kinds.iter().enumerate() {
            match kind {
                FeatureKind::AttributeMatch(k) => by_key.entry(k.clone()).or_default().push((i, false)),
                FeatureKind::ValueMatch(k) => by_key.entry(k.clone()).or_default().push((i, true)),
                _ => {}
            }
        }
        Ok(FeatureExtractor {
            registry,
            kinds,
            by_key,
            stats,
            params,
        })
    }

    pub fn registry(&self) -> &FeatureRegistry {
        &self.registry
    }

    pub fn extract(
        &self,
        query_text: &[String],
        predictions: &[AttributePrediction],
        product: &SyntheticProduct,
    ) -> FeatureVector {
        let text = &product.text_fields;
        let mut values: Vec<f64> = self
            .kinds
            .iter()
            .map(|kind| match kind {
                FeatureKind::QueryLength => query_text.len() as f64,
                FeatureKind::NumPredictedAttributes => predictions
                    .iter()
                    .filter(|p| p.attribute_key != CATEGORY_KEY)
                    .count() as f64,
                FeatureKind::TitleLength => text.title.len() as f64,
                FeatureKind::Price => product.price,
                FeatureKind::SalesCount => product.sales_count,
                FeatureKind::Rating => product.rating,
                FeatureKind::ReviewCount => product.review_count,
                FeatureKind::Bm25f => bm25f_score(query_text, text, &self.params, &self.stats),
                FeatureKind::Bm25fField(f) => {
                    bm25f_score(query_text, text, &self.params.single_field(*f), &self.stats)
                }
                FeatureKind::AttributeMatch(_) | FeatureKind::ValueMatch(_) => 0.0,
            })
            .collect();
        for p in predictions {
            let Some(slots) = self.by_key.get(&p.attribute_key) else { continue };
            let value = if p.attribute_key == CATEGORY_KEY {
                Some(product.department.as_str())
            } else {
                product.attributes.get(&p.attribute_key).map(String::as_str)
            };
            let Some(value) = value else { continue };
            for &(i, is_value) in slots {
                if !is_value || value == p.predicted_value {
                    values[i] = p.confidence;
                }
            }
        }
        FeatureVector::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DocId;
    use crate::features::TextFields;
    use std::collections::BTreeMap;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn phone_case() -> SyntheticProduct {
        SyntheticProduct {
            doc_id: DocId::from("case1"),
            department: "phone-cases".into(),
            attributes: BTreeMap::from([
                ("cases.color".to_string(), "blue".to_string()),
                ("cases.model".to_string(), "iphone6".to_string()),
            ]),
            price: 12.5,
            quality: 0.5,
            popularity_prior: 0.5,
            text_fields: TextFields {
                title: toks("blue iphone 6 case"),
                description: toks("slim blue case for iphone 6"),
                brand: toks("acme"),
            },
            sales_count: 40.0,
            rating: 4.2,
            review_count: 17.0,
        }
    }

    fn pred(key: &str, value: &str, confidence: f64) -> AttributePrediction {
        AttributePrediction {
            attribute_key: key.into(),
            predicted_value: value.into(),
            confidence,
        }
    }

    fn entry(id: u32, name: &str, group: FeatureGroup, key: Option<&str>, popularity: bool) -> FeatureEntry {
        FeatureEntry {
            id,
            name: name.into(),
            group,
            attribute_key: key.map(String::from),
            popularity,
        }
    }

    fn extractor(registry: FeatureRegistry) -> FeatureExtractor {
        let p = phone_case();
        let stats = CorpusStats::from_documents([&p.text_fields]);
        FeatureExtractor::new(registry, stats, Bm25fParams::default()).unwrap()
    }

    #[test]
    fn blue_iphone_case_scenario() {
        let vocab = AttributeVocabulary::from_catalog(&[phone_case()]);
        let ex = extractor(build_registry(&vocab).unwrap());
        let preds = [
            pred(CATEGORY_KEY, "phone-cases", 0.9),
            pred("cases.color", "blue", 0.8),
            pred("cases.model", "iphone6", 0.7),
        ];
        let v = ex.extract(&toks("blue iphone 6 case"), &preds, &phone_case());
        let id = |n: &str| ex.registry().id_of(n).unwrap();
        assert_eq!(v.get(id("avm:category")), 0.9);
        assert_eq!(v.get(id("avm:cases.color")), 0.8);
        assert_eq!(v.get(id("am:cases.color")), 0.8);
        assert!(v.get(id("bm25f")) > 0.0);
    }

    #[test]
    fn missing_attribute_zeroes_both() {
        let vocab = AttributeVocabulary::from_catalog(&[phone_case()]);
        let ex = extractor(build_registry(&vocab).unwrap());
        let mut p = phone_case();
        p.attributes.remove("cases.color");
        let v = ex.extract(&toks("blue case"), &[pred("cases.color", "blue", 0.8)], &p);
        assert_eq!(v.get(ex.registry().id_of("am:cases.color").unwrap()), 0.0);
        assert_eq!(v.get(ex.registry().id_of("avm:cases.color").unwrap()), 0.0);
    }

    #[test]
    fn hand_built_registry() {
        let registry = FeatureRegistry::new(vec![
            entry(1, "query_length", FeatureGroup::Query, None, false),
            entry(2, "rating", FeatureGroup::Document, None, true),
            entry(3, "am:cases.color", FeatureGroup::QueryDocument, Some("cases.color"), false),
            entry(4, "avm:cases.color", FeatureGroup::QueryDocument, Some("cases.color"), false),
            entry(5, "avm:cases.model", FeatureGroup::QueryDocument, Some("cases.model"), false),
        ])
        .unwrap();
        let ex = extractor(registry);
        let preds = [pred("cases.color", "red", 0.6), pred("cases.model", "iphone6", 0.4)];
        let v = ex.extract(&toks("red iphone case"), &preds, &phone_case());
        assert_eq!(v.values(), &[3.0, 4.2, 0.6, 0.0, 0.4]);
    }

    #[test]
    fn unknown_or_inconsistent_features_are_rejected() {
        let stats = CorpusStats::from_documents([&phone_case().text_fields]);
        let bad = FeatureRegistry::new(vec![entry(1, "clicks", FeatureGroup::QueryDocument, None, false)]).unwrap();
        assert!(FeatureExtractor::new(bad, stats.clone(), Bm25fParams::default()).is_err());
        let bad = FeatureRegistry::new(vec![entry(1, "am:x", FeatureGroup::QueryDocument, Some("y"), false)]).unwrap();
        assert!(FeatureExtractor::new(bad, stats, Bm25fParams::default()).is_err());
    }

    #[test]
    fn no_engagement_derived_features() {
        let vocab = AttributeVocabulary::from_catalog(&[phone_case()]);
        let registry = build_registry(&vocab).unwrap();
        for e in registry.entries() {
            for banned in ["click", "ctr", "atc", "cart", "order", "revenue", "impression"] {
                assert!(!e.name.contains(banned), "{}", e.name);
            }
        }
        let popularity: Vec<&str> = registry
            .entries()
            .iter()
            .filter(|e| e.popularity)
            .map(|e| e.name.as_str())
            .collect();
        assert_eq!(popularity, ["sales_count", "rating", "review_count"]);
    }
}
