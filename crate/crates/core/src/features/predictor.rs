use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::synth::{derive_seed, QueryIntent, SyntheticProduct};

/// Pseudo attribute carrying the product department.
pub const CATEGORY_KEY: &str = "category";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributePrediction {
    pub attribute_key: String,
    pub predicted_value: String,
    pub confidence: f64,
}

/// Observed values per attribute key, plus the department list under
/// `CATEGORY_KEY`. Keys of one department are listed under it as well.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttributeVocabulary {
    pub values: BTreeMap<String, Vec<String>>,
    pub department_keys: BTreeMap<String, Vec<String>>,
}

impl AttributeVocabulary {
    pub fn from_catalog(catalog: &[SyntheticProduct]) -> Self {
        let mut values: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut department_keys: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for p in catalog {
            values.entry(CATEGORY_KEY.to_string()).or_default().push(p.department.clone());
            let keys = department_keys.entry(p.department.clone()).or_default();
            for (k, v) in &p.attributes {
                values.entry(k.clone()).or_default().push(v.clone());
                keys.push(k.clone());
            }
        }
        for list in values.values_mut().chain(department_keys.values_mut()) {
            list.sort();
            list.dedup();
        }
        AttributeVocabulary {
            values,
            department_keys,
        }
    }

    /// Every attribute key, sorted, without the category pseudo key.
    pub fn keys(&self) -> Vec<&str> {
        self.values.keys().map(String::as_str).filter(|k| *k != CATEGORY_KEY).collect()
    }

    fn other_value(&self, key: &str, not: &str, rng: &mut impl Rng) -> Option<String> {
        let others: Vec<&String> = self.values.get(key)?.iter().filter(|v| *v != not).collect();
        others.choose(rng).map(|v| (*v).clone())
    }
}

fn confidence(accuracy: f64, rng: &mut impl Rng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (accuracy + (1.0 - accuracy) * 0.2 * z).clamp(0.0, 1.0)
}

/// Simulated query attribute predictor. The category and every required
/// attribute are predicted correctly with probability `accuracy`, otherwise
/// with a wrong value; with probability `1 - accuracy` one spurious attribute
/// of the query's department is added. Deterministic per (seed, query id).
pub fn predict_query_attributes(
    intent: &QueryIntent,
    vocabulary: &AttributeVocabulary,
    accuracy: f64,
    seed: u64,
) -> Vec<AttributePrediction> {
    let accuracy = accuracy.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, intent.query_id.0));
    let mut out = Vec::new();
    let mut emit = |key: &str, truth: &str, rng: &mut ChaCha8Rng| {
        let value = if rng.random::<f64>() < accuracy {
            Some(truth.to_string())
        } else {
            vocabulary.other_value(key, truth, rng)
        };
        if let Some(predicted_value) = value {
            let confidence = confidence(accuracy, rng);
            out.push(AttributePrediction {
                attribute_key: key.to_string(),
                predicted_value,
                confidence,
            });
        }
    };
    emit(CATEGORY_KEY, &intent.department, &mut rng);
    for (key, req) in &intent.required_attributes {
        emit(key, &req.value, &mut rng);
    }
    if rng.random::<f64>() >= accuracy {
        let free: Vec<&String> = vocabulary
            .department_keys
            .get(&intent.department)
            .map(|keys| keys.iter().filter(|k| !intent.required_attributes.contains_key(*k)).collect())
            .unwrap_or_default();
        if let Some(key) = free.choose(&mut rng) {
            if let Some(value) = vocabulary.values[*key].choose(&mut rng) {
                out.push(AttributePrediction {
                    attribute_key: (*key).clone(),
                    predicted_value: value.clone(),
                    confidence: confidence(accuracy, &mut rng),
                });
            }
        }
    }
    out
}
