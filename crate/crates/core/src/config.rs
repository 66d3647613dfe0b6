//! Flat `key = value` configuration covering rankers, the synthetic world,
//! featurization and experiments. Unset keys keep their defaults.

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::baselines::RankNetConfig;
use crate::error::{Error, Result};
use crate::gbdt::{LambdaMartConfig, RandomForestConfig};
use crate::pipeline::FeaturizeConfig;
use crate::synth::SynthSpec;

/// Settings shared by the six linear variants.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSettings {
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for LinearSettings {
    fn default() -> Self {
        LinearSettings {
            c: 1.0,
            epochs: 20,
            learning_rate: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSettings {
    pub folds: usize,
    pub ndcg_k: usize,
    pub impression_threshold: u64,
    pub significance_level: f64,
    pub holdout_departments: usize,
    /// Minimum test support fraction for intersection features.
    pub min_support: f64,
    pub infogain_bins: usize,
    pub histogram_buckets: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            folds: 5,
            ndcg_k: 10,
            impression_threshold: 100,
            significance_level: 0.05,
            holdout_departments: 10,
            min_support: 0.0,
            infogain_bins: 10,
            histogram_buckets: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub lambdamart: LambdaMartConfig,
    /// Fixed to `LambdaMART-RegressionTree`.
    pub learning_algorithm: String,
    /// Fixed to `NDCG`.
    pub evaluation_metric: String,
    pub print_intermediate: bool,
    pub forest: RandomForestConfig,
    pub linear: LinearSettings,
    pub ranknet: RankNetConfig,
    pub synth: SynthSpec,
    pub featurize: FeaturizeConfig,
    pub experiment: ExperimentSettings,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            lambdamart: LambdaMartConfig::default(),
            learning_algorithm: "LambdaMART-RegressionTree".into(),
            evaluation_metric: "NDCG".into(),
            print_intermediate: true,
            forest: RandomForestConfig::default(),
            linear: LinearSettings::default(),
            ranknet: RankNetConfig::default(),
            synth: SynthSpec::default(),
            featurize: FeaturizeConfig::default(),
            experiment: ExperimentSettings::default(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::parse(line, format!("`{key}`: cannot parse `{value}`: {e}")))
}

macro_rules! config_keys {
    ($( $key:literal => $($field:ident).+ $([$idx:literal])? ),* $(,)?) => {
        /// Every recognised key, in canonical order.
        pub const KEYS: &[&str] = &[$($key),*];

        impl Config {
            fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
                match key {
                    $($key => self.$($field).+ $([$idx])? = parse_value(key, value, line)?,)*
                    other => return Err(Error::parse(line, format!("unknown key `{other}`"))),
                }
                Ok(())
            }

            fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$(($key, self.$($field).+ $([$idx])?.to_string())),*]
            }
        }
    };
}

config_keys! {
    "trees.num-leaves" => lambdamart.num_leaves,
    "trees.min-instance-percentage-per-leaf" => lambdamart.min_instance_percentage_per_leaf,
    "boosting.learning-rate" => lambdamart.learning_rate,
    "boosting.sub-sampling" => lambdamart.sub_sampling,
    "trees.feature-sampling" => lambdamart.feature_sampling,
    "boosting.num-trees" => lambdamart.num_trees,
    "learning.algorithm" => learning_algorithm,
    "learning.evaluation-metric" => evaluation_metric,
    "params.print-intermediate-valid-measurements" => print_intermediate,
    "lambdamart.truncation-k" => lambdamart.truncation_k,
    "rf.num-trees" => forest.num_trees,
    "rf.bag-fraction" => forest.bag_fraction,
    "rf.feature-fraction" => forest.feature_fraction,
    "rf.num-leaves" => forest.num_leaves,
    "rf.min-instance-percentage-per-leaf" => forest.min_instance_percentage_per_leaf,
    "linear.c" => linear.c,
    "linear.epochs" => linear.epochs,
    "linear.learning-rate" => linear.learning_rate,
    "ranknet.hidden" => ranknet.hidden,
    "ranknet.learning-rate" => ranknet.learning_rate,
    "ranknet.epochs" => ranknet.epochs,
    "catalog.departments" => synth.catalog.departments,
    "catalog.products-per-department" => synth.catalog.products_per_department,
    "catalog.attributes-per-department" => synth.catalog.attributes_per_department,
    "catalog.values-per-attribute" => synth.catalog.values_per_attribute,
    "catalog.attribute-presence" => synth.catalog.attribute_presence,
    "catalog.filler-vocabulary" => synth.catalog.filler_vocabulary,
    "catalog.title-filler-words" => synth.catalog.title_filler_words,
    "catalog.description-filler-words" => synth.catalog.description_filler_words,
    "catalog.title-attribute-words" => synth.catalog.title_attribute_words,
    "catalog.description-attribute-probability" => synth.catalog.description_attribute_probability,
    "catalog.quality-popularity-correlation" => synth.catalog.quality_popularity_correlation,
    "catalog.price-sigma" => synth.catalog.price_sigma,
    "queries.count" => synth.queries.num_queries,
    "queries.broad-fraction" => synth.queries.broad_fraction,
    "queries.max-required-attributes" => synth.queries.max_required_attributes,
    "queries.min-criticality" => synth.queries.min_criticality,
    "queries.max-criticality" => synth.queries.max_criticality,
    "queries.filler-probability" => synth.queries.filler_probability,
    "queries.min-sessions" => synth.queries.min_sessions,
    "queries.max-sessions" => synth.queries.max_sessions,
    "queries.session-exponent" => synth.queries.session_exponent,
    "user.click-base" => synth.user_model.click_base,
    "user.atc-base" => synth.user_model.atc_base,
    "user.order-base" => synth.user_model.order_base,
    "user.utility-weight-match" => synth.user_model.utility_weight_match,
    "user.utility-weight-quality" => synth.user_model.utility_weight_quality,
    "user.utility-weight-popularity" => synth.user_model.utility_weight_popularity,
    "user.missing-attribute-penalty" => synth.user_model.missing_attribute_penalty,
    "user.position-bias-exponent" => synth.user_model.position_bias_exponent,
    "user.noise-sigma" => synth.user_model.noise_sigma,
    "user.social-proof-weight" => synth.user_model.social_proof_weight,
    "user.rating-threshold" => synth.user_model.rating_threshold,
    "user.low-rating-factor" => synth.user_model.low_rating_factor,
    "user.review-half-saturation" => synth.user_model.review_half_saturation,
    "simulation.retrieval-depth" => synth.simulation.retrieval_depth,
    "simulation.page-size" => synth.simulation.page_size,
    "simulation.continue-probability" => synth.simulation.continue_probability,
    "simulation.display-versions" => synth.simulation.display_versions,
    "simulation.display-noise" => synth.simulation.display_noise,
    "simulation.warmup-trials" => synth.simulation.warmup_trials,
    "simulation.warmup-rate" => synth.simulation.warmup_rate,
    "features.predictor-accuracy" => featurize.predictor_accuracy,
    "features.bm25f-k1" => featurize.bm25f.k1,
    "features.bm25f-b" => featurize.bm25f.b,
    "features.bm25f-title-weight" => featurize.bm25f.field_weights[0],
    "features.bm25f-description-weight" => featurize.bm25f.field_weights[1],
    "features.bm25f-brand-weight" => featurize.bm25f.field_weights[2],
    "experiment.folds" => experiment.folds,
    "experiment.ndcg-k" => experiment.ndcg_k,
    "experiment.impression-threshold" => experiment.impression_threshold,
    "experiment.significance-level" => experiment.significance_level,
    "experiment.holdout-departments" => experiment.holdout_departments,
    "experiment.min-support" => experiment.min_support,
    "experiment.infogain-bins" => experiment.infogain_bins,
    "experiment.histogram-buckets" => experiment.histogram_buckets,
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment, blank lines are
    /// skipped and a repeated key keeps its last value.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected `key = value`, found `{line}`")))?;
            config.set(key.trim(), value.trim(), i + 1)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_algorithm != "LambdaMART-RegressionTree" {
            return Err(Error::Config(format!(
                "unsupported learning.algorithm `{}`",
                self.learning_algorithm
            )));
        }
        if self.evaluation_metric != "NDCG" {
            return Err(Error::Config(format!(
                "unsupported learning.evaluation-metric `{}`",
                self.evaluation_metric
            )));
        }
        self.lambdamart.validate()?;
        self.synth.validate()?;
        self.featurize.bm25f.validate()?;
        let e = &self.experiment;
        if e.folds < 2 || e.ndcg_k == 0 || e.impression_threshold == 0 || e.infogain_bins == 0 {
            return Err(Error::Config("experiment counts out of range".into()));
        }
        if e.histogram_buckets == 0 {
            return Err(Error::Config("experiment.histogram-buckets must be positive".into()));
        }
        if !(e.significance_level > 0.0 && e.significance_level < 1.0) {
            return Err(Error::Config("experiment.significance-level outside (0, 1)".into()));
        }
        Ok(())
    }

    /// Canonical text listing every key.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Short digest of the canonical text.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_lambdamart_table() {
        let c = Config::parse("").unwrap();
        assert_eq!(c.lambdamart.num_leaves, 7);
        assert_eq!(c.lambdamart.min_instance_percentage_per_leaf, 0.25);
        assert_eq!(c.lambdamart.learning_rate, 0.05);
        assert_eq!(c.lambdamart.sub_sampling, 0.3);
        assert_eq!(c.lambdamart.feature_sampling, 0.3);
        assert_eq!(c.lambdamart.num_trees, 2000);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let c = Config::parse("# reduced\ntrees.num-leaves = 9\nboosting.num-trees=300 # fast\n\nuser.noise-sigma = 0\n")
            .unwrap();
        assert_eq!(c.lambdamart.num_leaves, 9);
        assert_eq!(c.lambdamart.num_trees, 300);
        assert_eq!(c.synth.user_model.noise_sigma, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Config::parse("trees.num-leaves").is_err());
        assert!(Config::parse("trees.num-leafs = 7").is_err());
        assert!(Config::parse("trees.num-leaves = seven").is_err());
        assert!(Config::parse("boosting.sub-sampling = 1.5").is_err());
        assert!(Config::parse("learning.algorithm = RankBoost").is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = Config::parse("boosting.num-trees = 300\ncatalog.price-sigma = 0.4").unwrap();
        let text = c.to_text();
        assert_eq!(text.lines().count(), KEYS.len());
        let back = Config::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.fingerprint(), c.fingerprint());
        assert_ne!(Config::default().fingerprint(), c.fingerprint());
    }
}
