use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::catalog::{is_filler, SyntheticProduct};
use super::spec::QuerySpec;
use crate::dataset::QueryId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequiredAttribute {
    pub value: String,
    pub criticality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryIntent {
    pub query_id: QueryId,
    pub text: Vec<String>,
    pub department: String,
    pub required_attributes: BTreeMap<String, RequiredAttribute>,
    pub sessions: u64,
}

/// Session count from a discrete power law with density exponent
/// `spec.session_exponent`, truncated to `[min_sessions, max_sessions]`.
pub fn draw_sessions(spec: &QuerySpec, rng: &mut impl Rng) -> u64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let s = spec.min_sessions as f64 * u.powf(-1.0 / (spec.session_exponent - 1.0));
    (s.floor() as u64).clamp(spec.min_sessions, spec.max_sessions)
}

/// Query ids run from 1. Specific queries copy attribute values from a
/// random product of their department so every constraint is satisfiable.
pub fn generate_queries(catalog: &[SyntheticProduct], spec: &QuerySpec, seed: u64) -> Vec<QueryIntent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_dept: BTreeMap<&str, Vec<&SyntheticProduct>> = BTreeMap::new();
    for p in catalog {
        by_dept.entry(&p.department).or_default().push(p);
    }
    let departments: Vec<&str> = by_dept.keys().copied().collect();
    if departments.is_empty() {
        return Vec::new();
    }
    (0..spec.num_queries)
        .map(|i| {
            let dept = *departments.choose(&mut rng).expect("nonempty");
            let products = &by_dept[dept];
            let anchor = products.choose(&mut rng).expect("nonempty");
            let mut required = BTreeMap::new();
            if rng.random::<f64>() >= spec.broad_fraction && !anchor.attributes.is_empty() {
                let keys: Vec<&String> = anchor.attributes.keys().collect();
                let m = rng.random_range(1..=spec.max_required_attributes.max(1).min(keys.len()));
                let mut picked: Vec<&String> = keys.choose_multiple(&mut rng, m).copied().collect();
                picked.sort();
                for k in picked {
                    let criticality = rng.random_range(spec.min_criticality..=spec.max_criticality);
                    required.insert(
                        k.clone(),
                        RequiredAttribute {
                            value: anchor.attributes[k].clone(),
                            criticality,
                        },
                    );
                }
            }
            let mut text: Vec<String> = required.values().map(|r| r.value.clone()).collect();
            text.push(dept.to_string());
            if rng.random::<f64>() < spec.filler_probability {
                let fillers: Vec<&String> = anchor.text_fields.description.iter().filter(|t| is_filler(t)).collect();
                if let Some(w) = fillers.choose(&mut rng) {
                    text.push((*w).clone());
                }
            }
            QueryIntent {
                query_id: QueryId(i as u64 + 1),
                text,
                department: dept.to_string(),
                required_attributes: required,
                sessions: draw_sessions(spec, &mut rng),
            }
        })
        .collect()
}
