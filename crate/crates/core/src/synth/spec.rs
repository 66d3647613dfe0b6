use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CatalogSpec {
    pub departments: usize,
    pub products_per_department: usize,
    pub attributes_per_department: usize,
    pub values_per_attribute: usize,
    /// Probability that a product carries each of its department's attributes.
    pub attribute_presence: f64,
    pub filler_vocabulary: usize,
    pub title_filler_words: usize,
    pub description_filler_words: usize,
    /// Non-brand attribute values written into each title.
    pub title_attribute_words: usize,
    /// Probability that the description mentions each attribute value.
    pub description_attribute_probability: f64,
    /// Mixing weight of quality into the popularity prior.
    pub quality_popularity_correlation: f64,
    pub price_sigma: f64,
}

impl Default for CatalogSpec {
    fn default() -> Self {
        CatalogSpec {
            departments: 26,
            products_per_department: 150,
            attributes_per_department: 4,
            values_per_attribute: 6,
            attribute_presence: 0.85,
            filler_vocabulary: 400,
            title_filler_words: 3,
            description_filler_words: 12,
            title_attribute_words: 2,
            description_attribute_probability: 1.0,
            quality_popularity_correlation: 0.5,
            price_sigma: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuerySpec {
    pub num_queries: usize,
    /// Share of category-only queries.
    pub broad_fraction: f64,
    pub max_required_attributes: usize,
    pub min_criticality: f64,
    pub max_criticality: f64,
    pub filler_probability: f64,
    pub min_sessions: u64,
    pub max_sessions: u64,
    /// Exponent of the session-count density `p(s) ~ s^-exponent`.
    pub session_exponent: f64,
}

impl Default for QuerySpec {
    fn default() -> Self {
        QuerySpec {
            num_queries: 560,
            broad_fraction: 0.25,
            max_required_attributes: 3,
            min_criticality: 0.4,
            max_criticality: 1.0,
            filler_probability: 0.3,
            min_sessions: 2000,
            max_sessions: 30_000,
            session_exponent: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UserModel {
    pub click_base: f64,
    pub atc_base: f64,
    pub order_base: f64,
    pub utility_weight_match: f64,
    pub utility_weight_quality: f64,
    pub utility_weight_popularity: f64,
    /// Mismatch charged when a product lacks a required attribute.
    pub missing_attribute_penalty: f64,
    pub position_bias_exponent: f64,
    pub noise_sigma: f64,
    /// Share of the add-to-cart probability governed by the displayed
    /// rating and review count.
    pub social_proof_weight: f64,
    /// Ratings below this scale the social-proof term by `low_rating_factor`.
    pub rating_threshold: f64,
    pub low_rating_factor: f64,
    /// Review count at which review trust reaches one half.
    pub review_half_saturation: f64,
}

impl Default for UserModel {
    fn default() -> Self {
        UserModel {
            click_base: 0.3,
            atc_base: 0.5,
            order_base: 0.6,
            utility_weight_match: 2.0,
            utility_weight_quality: 1.0,
            utility_weight_popularity: 1.0,
            missing_attribute_penalty: 0.5,
            position_bias_exponent: 0.5,
            noise_sigma: 0.1,
            social_proof_weight: 0.8,
            rating_threshold: 4.0,
            low_rating_factor: 0.2,
            review_half_saturation: 15.0,
        }
    }
}

impl UserModel {
    /// Removes quality, popularity and social proof from user behavior.
    pub fn without_popularity(mut self) -> Self {
        self.utility_weight_quality = 0.0;
        self.utility_weight_popularity = 0.0;
        self.social_proof_weight = 0.0;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSpec {
    pub retrieval_depth: usize,
    pub page_size: usize,
    /// Probability of moving on to the next result page.
    pub continue_probability: f64,
    /// Distinct perturbed rankings shown across sessions.
    pub display_versions: usize,
    pub display_noise: f64,
    pub warmup_trials: u64,
    pub warmup_rate: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            retrieval_depth: 120,
            page_size: 40,
            continue_probability: 0.2,
            display_versions: 4,
            display_noise: 0.3,
            warmup_trials: 500,
            warmup_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub catalog: CatalogSpec,
    pub queries: QuerySpec,
    pub user_model: UserModel,
    pub simulation: SimulationSpec,
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} outside [0, 1]")))
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} must be nonnegative")))
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let c = &self.catalog;
        if c.departments == 0 || c.products_per_department == 0 || c.values_per_attribute == 0 {
            return Err(Error::Config("catalog counts must be at least 1".into()));
        }
        if c.filler_vocabulary == 0 {
            return Err(Error::Config("filler vocabulary must be nonempty".into()));
        }
        unit("catalog.attribute-presence", c.attribute_presence)?;
        unit("catalog.quality-popularity-correlation", c.quality_popularity_correlation)?;
        unit("catalog.description-attribute-probability", c.description_attribute_probability)?;
        nonneg("catalog.price-sigma", c.price_sigma)?;
        let q = &self.queries;
        unit("queries.broad-fraction", q.broad_fraction)?;
        unit("queries.filler-probability", q.filler_probability)?;
        unit("queries.min-criticality", q.min_criticality)?;
        unit("queries.max-criticality", q.max_criticality)?;
        if q.min_criticality > q.max_criticality {
            return Err(Error::Config("min criticality exceeds max criticality".into()));
        }
        if q.min_sessions > q.max_sessions {
            return Err(Error::Config("min sessions exceeds max sessions".into()));
        }
        if q.session_exponent <= 1.0 {
            return Err(Error::Config("session exponent must exceed 1".into()));
        }
        let u = &self.user_model;
        unit("user.click-base", u.click_base)?;
        unit("user.atc-base", u.atc_base)?;
        unit("user.order-base", u.order_base)?;
        unit("user.missing-attribute-penalty", u.missing_attribute_penalty)?;
        nonneg("user.utility-weight-match", u.utility_weight_match)?;
        nonneg("user.utility-weight-quality", u.utility_weight_quality)?;
        nonneg("user.utility-weight-popularity", u.utility_weight_popularity)?;
        nonneg("user.position-bias-exponent", u.position_bias_exponent)?;
        nonneg("user.noise-sigma", u.noise_sigma)?;
        unit("user.social-proof-weight", u.social_proof_weight)?;
        unit("user.low-rating-factor", u.low_rating_factor)?;
        nonneg("user.rating-threshold", u.rating_threshold)?;
        nonneg("user.review-half-saturation", u.review_half_saturation)?;
        if u.utility_weight_match + u.utility_weight_quality + u.utility_weight_popularity <= 0.0 {
            return Err(Error::Config("at least one utility weight must be positive".into()));
        }
        let s = &self.simulation;
        if s.retrieval_depth == 0 || s.page_size == 0 || s.display_versions == 0 {
            return Err(Error::Config("simulation counts must be at least 1".into()));
        }
        unit("simulation.continue-probability", s.continue_probability)?;
        unit("simulation.warmup-rate", s.warmup_rate)?;
        nonneg("simulation.display-noise", s.display_noise)?;
        Ok(())
    }
}
