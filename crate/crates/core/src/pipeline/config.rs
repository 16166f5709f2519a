use std::path::PathBuf;

use collrec_gbdt::GbdtParams;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::embedding::EmbeddingConfig;
use crate::eval::AbDesign;
use crate::features::{self, FeatureConfig, FeatureSchema};
use crate::marketplace::{MarketplaceConfig, MealShift};

pub const PIPELINE_SCHEMA_VERSION: u32 = 1;

/// The whole experiment in one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    /// Base seed; ladder seed `i` is `seed + i`.
    pub seed: u64,
    /// Where the stage commands keep their artifacts, relative to the
    /// config file unless absolute.
    pub artifact_dir: PathBuf,
    pub marketplace: MarketplaceConfig,
    pub embedding: EmbeddingConfig,
    pub features: FeatureConfig,
    pub boost: BoostConfig,
    pub dataset: DatasetConfig,
    pub eval: EvalConfig,
}

/// Booster hyperparameters; monotone flags come from the feature schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub l2_leaf_penalty: f64,
    pub n_bins: usize,
}

/// Which logged sessions become training pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingSource {
    /// Exploration-flagged card sessions.
    Sampled,
    /// Category-carousel sessions.
    Carousel,
    /// Both; requires `allow_mixed`.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Share of logged card sessions replaced by a random pair.
    pub exploration_rate: f64,
    /// Card sessions in the logging run.
    pub log_sessions: usize,
    /// Carousel sessions logged when the training source needs them.
    pub carousel_sessions: usize,
    /// Cards (and carousel categories) shown per regular session.
    pub display_k: usize,
    /// Share of users held out for offline evaluation.
    pub holdout: f64,
    pub source: TrainingSource,
    pub allow_mixed: bool,
}

/// A rung of the variant ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VariantSpec {
    /// Ranks by the collection's order count in the meal shift.
    Popularity { name: String },
    /// A booster trained on the listed features.
    Model { name: String, features: Vec<String> },
}

impl VariantSpec {
    pub fn name(&self) -> &str {
        match self {
            VariantSpec::Popularity { name } | VariantSpec::Model { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Sessions per A/B arm.
    pub ab_sessions: usize,
    pub ab_design: AbDesign,
    /// Pair users by their conversion in the logged sessions before the
    /// arm split.
    pub ab_matched: bool,
    /// Seeds the ladder averages over.
    pub ladder_seeds: usize,
    /// Variants compared by `abtest`; names from `ladder`.
    pub ab_control: String,
    pub ab_variant: String,
    pub ladder: Vec<VariantSpec>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: PIPELINE_SCHEMA_VERSION,
            seed: 1,
            artifact_dir: PathBuf::from("artifacts"),
            marketplace: MarketplaceConfig::default(),
            embedding: EmbeddingConfig::default(),
            features: FeatureConfig::default(),
            boost: BoostConfig::default(),
            dataset: DatasetConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl Default for BoostConfig {
    fn default() -> Self {
        let p = GbdtParams::default();
        BoostConfig {
            n_trees: p.n_trees,
            learning_rate: p.learning_rate,
            max_leaves: p.max_leaves,
            min_samples_leaf: p.min_samples_leaf,
            l2_leaf_penalty: p.l2_leaf_penalty,
            n_bins: p.n_bins,
        }
    }
}

impl BoostConfig {
    pub fn params(&self, schema: &FeatureSchema, seed: u64) -> GbdtParams {
        GbdtParams {
            n_trees: self.n_trees,
            learning_rate: self.learning_rate,
            max_leaves: self.max_leaves,
            min_samples_leaf: self.min_samples_leaf,
            l2_leaf_penalty: self.l2_leaf_penalty,
            n_bins: self.n_bins,
            monotone: schema.features.iter().map(|f| f.monotone).collect(),
            seed,
        }
    }
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            exploration_rate: 0.1,
            log_sessions: 100_000,
            carousel_sessions: 20_000,
            display_k: 3,
            holdout: 0.2,
            source: TrainingSource::Sampled,
            allow_mixed: false,
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ab_sessions: 100_000,
            ab_design: AbDesign::UserSplit,
            ab_matched: true,
            ladder_seeds: 5,
            ab_control: "popularity".into(),
            ab_variant: "full".into(),
            ladder: default_ladder(),
        }
    }
}

/// Popularity, then collection features, then the similarity features,
/// then the normalized shift-order and restaurant-order counts.
pub fn default_ladder() -> Vec<VariantSpec> {
    let mut collection: Vec<String> = [
        features::POPULARITY_BY_SHIFT,
        features::IS_DISH_COLLECTION,
        features::FREE_DELIVERY_ORDER_FRACTION,
        features::SHIFT_SPECIFICITY,
        features::COLLECTION_SIZE,
        features::MEAN_DELIVERY_FEE,
        features::ORDER_POPULARITY,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    collection.extend(MealShift::ALL.iter().map(|s| features::shift_feature(*s)));
    let mut similarity = collection.clone();
    similarity.extend(features::SIMILARITY.iter().map(|s| s.to_string()));
    similarity.push(features::VEGAN_MATCH.to_string());
    let mut full = similarity.clone();
    full.push(features::ORDERS_IN_COLLECTION_RESTAURANTS.to_string());
    full.push(features::SHIFT_ORDERS_PER_RESTAURANT.to_string());
    vec![
        VariantSpec::Popularity {
            name: "popularity".into(),
        },
        VariantSpec::Model {
            name: "collection".into(),
            features: collection,
        },
        VariantSpec::Model {
            name: "similarity".into(),
            features: similarity,
        },
        VariantSpec::Model {
            name: "full".into(),
            features: full,
        },
    ]
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: String| Err(PipelineError::Config(m));
        if self.schema_version != PIPELINE_SCHEMA_VERSION {
            return fail(format!(
                "schema_version {} is not supported (expected {PIPELINE_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.marketplace.validate()?;
        self.embedding.validate()?;
        let schema = FeatureSchema::canonical(self.features.extensions);
        self.boost.params(&schema, 0).validate()?;

        let d = &self.dataset;
        if !(d.exploration_rate > 0.0 && d.exploration_rate <= 1.0) {
            return fail(format!("dataset.exploration_rate {} is outside (0, 1]", d.exploration_rate));
        }
        if !(d.holdout > 0.0 && d.holdout < 1.0) {
            return fail(format!("dataset.holdout {} is outside (0, 1)", d.holdout));
        }
        if d.display_k < 2 {
            return fail("dataset.display_k must be at least 2".into());
        }
        if d.log_sessions == 0 {
            return fail("dataset.log_sessions must be positive".into());
        }
        if d.source == TrainingSource::Mixed && !d.allow_mixed {
            return fail("dataset.source = \"mixed\" needs dataset.allow_mixed = true".into());
        }
        if d.source != TrainingSource::Sampled && d.carousel_sessions == 0 {
            return fail("dataset.carousel_sessions must be positive for carousel training".into());
        }

        let e = &self.eval;
        if e.ab_sessions < 2 {
            return fail("eval.ab_sessions must be at least 2".into());
        }
        if e.ladder_seeds == 0 {
            return fail("eval.ladder_seeds must be positive".into());
        }
        if e.ladder.len() < 3 {
            return fail(format!("eval.ladder needs at least 3 variants, got {}", e.ladder.len()));
        }
        let mut names = std::collections::HashSet::new();
        for v in &e.ladder {
            let ok = |c: char| c.is_ascii_alphanumeric() || c == '_' || c == '-';
            if v.name().is_empty() || !v.name().chars().all(ok) {
                return fail(format!(
                    "ladder variant name {:?} must be non-empty ASCII letters, digits, '_' or '-'",
                    v.name()
                ));
            }
            if !names.insert(v.name()) {
                return fail(format!("duplicate ladder variant {:?}", v.name()));
            }
            if let VariantSpec::Model { name, features } = v {
                if features.is_empty() {
                    return fail(format!("ladder variant {name:?} lists no features"));
                }
                for f in features {
                    if schema.index_of(f).is_none() {
                        return fail(format!("ladder variant {name:?} uses unknown feature {f:?}"));
                    }
                }
            }
        }
        for n in [&e.ab_control, &e.ab_variant] {
            if !names.contains(n.as_str()) {
                return fail(format!("A/B variant {n:?} is not in eval.ladder"));
            }
        }
        Ok(())
    }

    pub fn variant(&self, name: &str) -> Option<&VariantSpec> {
        self.eval.ladder.iter().find(|v| v.name() == name)
    }
}
