use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::spec::{CatalogSpec, SimulationSpec, UserModel};
use crate::dataset::DocId;
use crate::features::TextFields;

const ATTRIBUTE_NAMES: [&str; 8] = ["brand", "color", "size", "material", "style", "pattern", "finish", "fit"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProduct {
    pub doc_id: DocId,
    pub department: String,
    pub attributes: BTreeMap<String, String>,
    pub price: f64,
    pub quality: f64,
    pub popularity_prior: f64,
    pub text_fields: TextFields,
    pub sales_count: f64,
    pub rating: f64,
    pub review_count: f64,
}

pub fn department_name(i: usize) -> String {
    format!("d{i:02}")
}

pub fn attribute_name(i: usize) -> String {
    ATTRIBUTE_NAMES
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("attr{i}"))
}

/// Department-scoped attribute key such as `d07.color`.
pub fn attribute_key(department: &str, name: &str) -> String {
    format!("{department}.{name}")
}

/// Text token naming one attribute value, e.g. `d07color3`.
pub fn value_token(department: &str, name: &str, value: usize) -> String {
    format!("{department}{name}{value}")
}

pub fn filler_word(i: usize) -> String {
    format!("w{i}")
}

pub fn is_filler(token: &str) -> bool {
    token.len() > 1 && token.starts_with('w') && token[1..].bytes().all(|b| b.is_ascii_digit())
}

/// Zipf-like weights `1 / (i + 1)^s`.
pub(crate) fn zipf(n: usize, s: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((0..n).map(|i| 1.0 / ((i + 1) as f64).powf(s))).expect("positive weights")
}

/// Products of every department, ordered by department then index. Quality,
/// prior popularity, attributes and text are drawn here; the popularity
/// fields (sales, rating, reviews) are filled by `derive_popularity_fields`.
pub fn generate_catalog(spec: &CatalogSpec, seed: u64) -> Vec<SyntheticProduct> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quality_dist = Beta::new(2.0, 2.0).expect("valid beta");
    let std_normal = Normal::<f64>::new(0.0, 1.0).expect("valid normal");
    let values = zipf(spec.values_per_attribute, 0.8);
    let fillers = zipf(spec.filler_vocabulary, 1.0);
    let mut catalog = Vec::with_capacity(spec.departments * spec.products_per_department);
    for d in 0..spec.departments {
        let dept = department_name(d);
        let base_price = (3.5 + 0.8 * std_normal.sample(&mut rng)).exp();
        for p in 0..spec.products_per_department {
            let mut attributes = BTreeMap::new();
            let mut tokens: Vec<(String, String)> = Vec::new();
            for a in 0..spec.attributes_per_department {
                if rng.random::<f64>() < spec.attribute_presence {
                    let name = attribute_name(a);
                    let v = values.sample(&mut rng);
                    let tok = value_token(&dept, &name, v);
                    attributes.insert(attribute_key(&dept, &name), tok.clone());
                    tokens.push((name, tok));
                }
            }
            let quality: f64 = quality_dist.sample(&mut rng);
            let rho = spec.quality_popularity_correlation;
            let popularity_prior = (rho * quality + (1.0 - rho) * rng.random::<f64>()).clamp(0.0, 1.0);
            let price = (base_price * (spec.price_sigma * std_normal.sample(&mut rng)).exp() * 100.0).round() / 100.0;

            let brand: Vec<String> = tokens
                .iter()
                .filter(|(n, _)| n == "brand")
                .map(|(_, t)| t.clone())
                .collect();
            let others: Vec<&String> = tokens.iter().filter(|(n, _)| n != "brand").map(|(_, t)| t).collect();
            let mut title = brand.clone();
            title.push(dept.clone());
            title.extend(
                others
                    .choose_multiple(&mut rng, spec.title_attribute_words.min(others.len()))
                    .map(|t| (*t).clone()),
            );
            title.extend((0..spec.title_filler_words).map(|_| filler_word(fillers.sample(&mut rng))));
            let coverage = spec.description_attribute_probability;
            let mut description: Vec<String> = tokens
                .iter()
                .filter(|_| coverage >= 1.0 || rng.random::<f64>() < coverage)
                .map(|(_, t)| t.clone())
                .collect();
            description.push(dept.clone());
            description.extend((0..spec.description_filler_words).map(|_| filler_word(fillers.sample(&mut rng))));

            catalog.push(SyntheticProduct {
                doc_id: DocId(format!("p{d:02}{p:04}")),
                department: dept.clone(),
                attributes,
                price: price.max(0.01),
                quality,
                popularity_prior,
                text_fields: TextFields {
                    title,
                    description,
                    brand,
                },
                sales_count: 0.0,
                rating: 0.0,
                review_count: 0.0,
            });
        }
    }
    catalog
}

/// Appeal driving warm-up sales: the quality/popularity part of the utility,
/// or a constant when the user model ignores both.
pub fn appeal(product: &SyntheticProduct, user: &UserModel) -> f64 {
    let (wq, wp) = (user.utility_weight_quality, user.utility_weight_popularity);
    if wq + wp > 0.0 {
        (wq * product.quality + wp * product.popularity_prior) / (wq + wp)
    } else {
        0.5
    }
}

/// Sales from a warm-up epoch of purchase trials driven by appeal; rating and
/// review count are noisy increasing functions of quality.
pub fn derive_popularity_fields(
    catalog: &mut [SyntheticProduct],
    user: &UserModel,
    sim: &SimulationSpec,
    seed: u64,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::<f64>::new(0.0, 1.0).expect("valid normal");
    for p in catalog.iter_mut() {
        let rate = (sim.warmup_rate * appeal(p, user)).clamp(0.0, 1.0);
        let sales = Binomial::new(sim.warmup_trials, rate).expect("valid binomial").sample(&mut rng);
        p.sales_count = sales as f64;
        let rating = (1.0 + 4.0 * p.quality + 0.6 * std_normal.sample(&mut rng)).clamp(1.0, 5.0);
        p.rating = (rating * 10.0).round() / 10.0;
        p.review_count = (1.5 + 2.5 * p.quality + 0.5 * std_normal.sample(&mut rng)).exp().floor();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn singleton_and_determinism() {
        let spec = CatalogSpec {
            departments: 1,
            products_per_department: 1,
            ..Default::default()
        };
        assert_eq!(generate_catalog(&spec, 1).len(), 1);
        let spec = CatalogSpec::default();
        assert_eq!(generate_catalog(&spec, 7), generate_catalog(&spec, 7));
        assert_ne!(generate_catalog(&spec, 7), generate_catalog(&spec, 8));
    }

    #[test]
    fn disjoint_department_vocabularies() {
        let spec = CatalogSpec {
            products_per_department: 200,
            ..Default::default()
        };
        let catalog = generate_catalog(&spec, 3);
        assert_eq!(catalog.len(), 5200);
        let mut keys_by_dept: BTreeMap<&str, HashSet<&str>> = BTreeMap::new();
        for p in &catalog {
            for k in p.attributes.keys() {
                assert!(k.starts_with(&format!("{}.", p.department)));
                keys_by_dept.entry(&p.department).or_default().insert(k);
            }
        }
        let sets: Vec<_> = keys_by_dept.values().collect();
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                assert!(sets[i].is_disjoint(sets[j]));
            }
        }
        assert_eq!(keys_by_dept.len(), 26);
    }

    #[test]
    fn popularity_fields_follow_appeal() {
        let mut catalog = generate_catalog(&CatalogSpec::default(), 5);
        derive_popularity_fields(&mut catalog, &UserModel::default(), &SimulationSpec::default(), 6);
        let user = UserModel::default();
        let (mut lo, mut hi) = ((0.0, 0), (0.0, 0));
        for p in &catalog {
            assert!(p.sales_count >= 0.0 && (1.0..=5.0).contains(&p.rating) && p.review_count >= 0.0);
            if appeal(p, &user) < 0.4 {
                lo = (lo.0 + p.sales_count, lo.1 + 1);
            } else if appeal(p, &user) > 0.6 {
                hi = (hi.0 + p.sales_count, hi.1 + 1);
            }
        }
        assert!(hi.0 / hi.1 as f64 > lo.0 / lo.1 as f64);
    }
}
