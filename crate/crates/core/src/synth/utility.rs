use super::catalog::SyntheticProduct;
use super::queries::QueryIntent;
use super::spec::UserModel;

/// `prod_k (1 - criticality_k * mismatch_k)` over the query's required
/// attributes: mismatch is 0 on an equal value, 1 on a different value and
/// the missing-attribute penalty when the product lacks the key.
pub fn attribute_match(query: &QueryIntent, product: &SyntheticProduct, user: &UserModel) -> f64 {
    query
        .required_attributes
        .iter()
        .map(|(key, req)| {
            let mismatch = match product.attributes.get(key) {
                Some(v) if *v == req.value => 0.0,
                Some(_) => 1.0,
                None => user.missing_attribute_penalty,
            };
            1.0 - req.criticality * mismatch
        })
        .product()
}

fn blend(m: f64, terms: &[(f64, f64)]) -> f64 {
    let total: f64 = terms.iter().map(|(w, _)| w).sum();
    if total <= 0.0 {
        return m;
    }
    m * terms.iter().map(|(w, v)| w * v).sum::<f64>() / total
}

/// Page-level utility in `[0, 1]`; zero across departments.
pub fn true_utility(query: &QueryIntent, product: &SyntheticProduct, user: &UserModel) -> f64 {
    if query.department != product.department {
        return 0.0;
    }
    let m = attribute_match(query, product, user);
    blend(
        m,
        &[
            (user.utility_weight_match, 1.0),
            (user.utility_weight_quality, product.quality),
            (user.utility_weight_popularity, product.popularity_prior),
        ],
    )
    .clamp(0.0, 1.0)
}

/// Utility perceived from the result list: as `true_utility` without quality.
pub fn title_utility(query: &QueryIntent, product: &SyntheticProduct, user: &UserModel) -> f64 {
    if query.department != product.department {
        return 0.0;
    }
    let m = attribute_match(query, product, user);
    blend(
        m,
        &[
            (user.utility_weight_match, 1.0),
            (user.utility_weight_popularity, product.popularity_prior),
        ],
    )
    .clamp(0.0, 1.0)
}

/// Add-to-cart multiplier in `[0, 1]` from what the product page shows:
/// `1 - w + w * gate(rating) * reviews / (reviews + half)`.
pub fn social_proof(product: &SyntheticProduct, user: &UserModel) -> f64 {
    let w = user.social_proof_weight;
    if w == 0.0 {
        return 1.0;
    }
    let gate = if product.rating >= user.rating_threshold {
        1.0
    } else {
        user.low_rating_factor
    };
    let reviews = product.review_count as f64;
    let trust = if user.review_half_saturation == 0.0 {
        1.0
    } else {
        reviews / (reviews + user.review_half_saturation)
    };
    1.0 - w + w * gate * trust
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DocId, QueryId};
    use crate::features::TextFields;
    use crate::synth::queries::RequiredAttribute;
    use std::collections::BTreeMap;

    fn product(dept: &str, attrs: &[(&str, &str)], quality: f64, popularity: f64) -> SyntheticProduct {
        SyntheticProduct {
            doc_id: DocId::from("p"),
            department: dept.into(),
            attributes: attrs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            price: 10.0,
            quality,
            popularity_prior: popularity,
            text_fields: TextFields::default(),
            sales_count: 0.0,
            rating: 0.0,
            review_count: 0.0,
        }
    }

    fn query(dept: &str, req: &[(&str, &str, f64)]) -> QueryIntent {
        QueryIntent {
            query_id: QueryId(1),
            text: vec![],
            department: dept.into(),
            required_attributes: req
                .iter()
                .map(|(k, v, c)| {
                    (
                        k.to_string(),
                        RequiredAttribute {
                            value: v.to_string(),
                            criticality: *c,
                        },
                    )
                })
                .collect::<BTreeMap<_, _>>(),
            sessions: 1,
        }
    }

    #[test]
    fn cross_department_is_zero() {
        let u = UserModel::default();
        assert_eq!(true_utility(&query("a", &[]), &product("b", &[], 1.0, 1.0), &u), 0.0);
        assert_eq!(title_utility(&query("a", &[]), &product("b", &[], 1.0, 1.0), &u), 0.0);
    }

    #[test]
    fn perfect_product_has_unit_utility() {
        let u = UserModel::default();
        let q = query("a", &[("a.color", "blue", 0.9)]);
        assert_eq!(true_utility(&q, &product("a", &[("a.color", "blue")], 1.0, 1.0), &u), 1.0);
    }

    /// Independent re-derivation of the formula for a mid-range case.
    #[test]
    fn mid_case_matches_hand_formula() {
        let u = UserModel::default();
        let q = query("a", &[("a.color", "blue", 0.8), ("a.size", "xl", 0.5), ("a.brand", "acme", 0.6)]);
        let p = product("a", &[("a.color", "red"), ("a.brand", "acme")], 0.3, 0.7);
        // color mismatches (1 - 0.8), size missing (1 - 0.5 * 0.5), brand matches.
        let m = 0.2 * 0.75 * 1.0;
        let expected = m * (2.0 * 1.0 + 1.0 * 0.3 + 1.0 * 0.7) / 4.0;
        assert!((true_utility(&q, &p, &u) - expected).abs() < 1e-15);
        let expected_title = m * (2.0 + 0.7) / 3.0;
        assert!((title_utility(&q, &p, &u) - expected_title).abs() < 1e-15);
        let flat = u.clone().without_popularity();
        assert!((true_utility(&q, &p, &flat) - m).abs() < 1e-15);
    }
}
