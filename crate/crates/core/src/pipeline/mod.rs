//! The end-to-end experiment: world generation, exploration logging,
//! dataset construction, ladder training, offline evaluation and simulated
//! A/B tests. The CLI runs these stages one at a time; [`run_ladder`] runs
//! them all in memory.

mod config;

use collrec_gbdt::{train, GbdtModel, Matrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    build_carousel_dataset, build_unbiased_dataset, split_dataset, DatasetError, ExplorationPolicy, LabeledDataset,
};
use crate::embedding::{build_item_embeddings, EmbeddingError, EmbeddingStore};
use crate::eval::{
    average_reports, offline_online_correlation, pairwise_accuracy, simulate_ab_test, user_conversion, AbConfig, AbReport,
    CorrelationReport, EvalError, EvalReport, LadderStep, ModelScorer, OracleScorer, PopularityScorer,
    RankingPolicy, ScoreTable, Scorer,
};
use crate::features::{FeatureError, FeatureExtractor, FeatureSchema};
use crate::marketplace::{
    generate_marketplace, ChoiceModel, MarketError, Marketplace, SessionConfig, SessionEvent, Simulator, Surface,
    UniformRandomPolicy, UserId,
};
use crate::rng::derive_seed;

pub use config::{
    default_ladder, BoostConfig, DatasetConfig, EvalConfig, PipelineConfig, TrainingSource, VariantSpec,
    PIPELINE_SCHEMA_VERSION,
};

// Seed tags per stage.
const MARKET: u64 = 1;
const EMBEDDINGS: u64 = 2;
const LOG: u64 = 3;
const CAROUSEL_LOG: u64 = 4;
const CAROUSEL_PAIRS: u64 = 5;
const SPLIT: u64 = 6;
const TRAIN: u64 = 7;
const AB: u64 = 8;

/// Carousel sessions are numbered after the card sessions so the two logs
/// never share a session id.
const CAROUSEL_SESSION_OFFSET: u64 = 1 << 40;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] collrec_gbdt::GbdtError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A generated market with everything derived from it.
pub struct World {
    pub market: Marketplace,
    pub store: EmbeddingStore,
    pub extractor: FeatureExtractor,
    pub choice: ChoiceModel,
}

impl World {
    pub fn generate(cfg: &PipelineConfig, seed: u64) -> Result<Self, PipelineError> {
        let market = generate_marketplace(&cfg.marketplace, derive_seed(seed, &[MARKET]))?;
        let store = build_item_embeddings(&market, &cfg.embedding, derive_seed(seed, &[EMBEDDINGS]))?;
        Self::from_parts(cfg, market, store)
    }

    pub fn from_parts(cfg: &PipelineConfig, market: Marketplace, store: EmbeddingStore) -> Result<Self, PipelineError> {
        let extractor = FeatureExtractor::build(&market, &store, &cfg.embedding, &cfg.features)?;
        let choice = ChoiceModel::new(&market);
        Ok(World {
            market,
            store,
            extractor,
            choice,
        })
    }

    pub fn simulator(&self) -> Simulator<'_> {
        Simulator::new(&self.market, &self.choice)
    }

    pub fn schema(&self) -> &FeatureSchema {
        self.extractor.schema()
    }

    pub fn popularity_table(&self) -> Result<ScoreTable, PipelineError> {
        Ok(ScoreTable::build(
            &PopularityScorer {
                extractor: &self.extractor,
            },
            &self.market,
            &self.extractor,
        )?)
    }
}

/// Logged sessions: card sessions under the exploring popularity ranking,
/// plus carousel sessions when the training source needs them.
#[derive(Debug, Clone, PartialEq)]
pub struct Logs {
    pub cards: Vec<SessionEvent>,
    pub carousel: Vec<SessionEvent>,
}

pub fn log_sessions(world: &World, cfg: &PipelineConfig, seed: u64) -> Result<Logs, PipelineError> {
    let d = &cfg.dataset;
    let table = world.popularity_table()?;
    let policy = ExplorationPolicy::new(
        d.exploration_rate,
        RankingPolicy {
            table: &table,
            k: d.display_k,
        },
    )?;
    let sim = world.simulator();
    let cards = sim.run(
        &policy,
        &SessionConfig::new(&world.market, d.log_sessions, derive_seed(seed, &[LOG])),
    )?;
    let carousel = if d.source == TrainingSource::Sampled {
        Vec::new()
    } else {
        let sc = SessionConfig {
            surface: Surface::Carousel,
            first_session: CAROUSEL_SESSION_OFFSET,
            ..SessionConfig::new(&world.market, d.carousel_sessions, derive_seed(seed, &[CAROUSEL_LOG]))
        };
        sim.run(&UniformRandomPolicy { k: d.display_k }, &sc)?
    };
    Ok(Logs { cards, carousel })
}

#[derive(Debug, Clone)]
pub struct Datasets {
    pub train: LabeledDataset,
    /// Always exploration pairs from held-out users.
    pub test: LabeledDataset,
}

/// Exploration pairs split by user; the training side is swapped for (or
/// merged with) carousel pairs of the training users as configured.
pub fn build_datasets(world: &World, logs: &Logs, cfg: &PipelineConfig, seed: u64) -> Result<Datasets, PipelineError> {
    let d = &cfg.dataset;
    let sampled = build_unbiased_dataset(&logs.cards, &world.extractor)?;
    let (train, test) = split_dataset(&sampled, d.holdout, derive_seed(seed, &[SPLIT]))?;
    let train = match d.source {
        TrainingSource::Sampled => train,
        TrainingSource::Carousel | TrainingSource::Mixed => {
            let test_users: std::collections::BTreeSet<UserId> = test.pairs.iter().map(|p| p.user_id).collect();
            let carousel = build_carousel_dataset(&logs.carousel, &world.extractor, derive_seed(seed, &[CAROUSEL_PAIRS]))?
                .filter(|p| !test_users.contains(&p.user_id));
            if d.source == TrainingSource::Carousel {
                carousel
            } else {
                carousel.merge(train, d.allow_mixed)?
            }
        }
    };
    Ok(Datasets { train, test })
}

/// Trains a booster on the named columns of `train`.
pub fn train_variant(
    train_set: &LabeledDataset,
    features: &[String],
    boost: &BoostConfig,
    seed: u64,
) -> Result<GbdtModel, PipelineError> {
    let (sub, columns) = train_set.schema.project(features)?;
    let rows: Vec<Vec<f64>> = train_set
        .rows
        .iter()
        .map(|r| columns.iter().map(|&i| r.values[i]).collect())
        .collect();
    let info = sub.gbdt_schema();
    let params = boost.params(&sub, seed);
    Ok(train(&Matrix::from_rows(&rows), &train_set.labels(), &info, &params)?)
}

/// Models for every model rung of the ladder, in ladder order (`None` for
/// the popularity rung).
pub fn train_ladder(
    cfg: &PipelineConfig,
    train_set: &LabeledDataset,
    seed: u64,
) -> Result<Vec<Option<GbdtModel>>, PipelineError> {
    cfg.eval
        .ladder
        .iter()
        .map(|v| match v {
            VariantSpec::Popularity { .. } => Ok(None),
            VariantSpec::Model { features, .. } => {
                train_variant(train_set, features, &cfg.boost, derive_seed(seed, &[TRAIN])).map(Some)
            }
        })
        .collect()
}

/// One scorer per ladder rung.
pub fn ladder_scorers<'w>(
    world: &'w World,
    cfg: &PipelineConfig,
    models: &[Option<GbdtModel>],
) -> Result<Vec<Box<dyn Scorer + 'w>>, PipelineError> {
    cfg.eval
        .ladder
        .iter()
        .zip(models)
        .map(|(v, m)| -> Result<Box<dyn Scorer + 'w>, PipelineError> {
            Ok(match (v, m) {
                (VariantSpec::Popularity { .. }, _) => Box::new(PopularityScorer {
                    extractor: &world.extractor,
                }),
                (VariantSpec::Model { name, .. }, Some(model)) => {
                    Box::new(ModelScorer::new(name.clone(), model.clone(), world.schema())?)
                }
                (VariantSpec::Model { name, .. }, None) => {
                    return Err(PipelineError::Config(format!("no model for ladder variant {name:?}")))
                }
            })
        })
        .collect()
}

/// Pairwise accuracy of every rung on `test`, labeled with rung names.
pub fn evaluate_ladder(
    cfg: &PipelineConfig,
    scorers: &[Box<dyn Scorer + '_>],
    test: &LabeledDataset,
) -> Result<Vec<EvalReport>, PipelineError> {
    cfg.eval
        .ladder
        .iter()
        .zip(scorers)
        .map(|(v, s)| {
            let mut r = pairwise_accuracy(s.as_ref(), test)?;
            r.model_id = v.name().to_string();
            Ok(r)
        })
        .collect()
}

pub fn evaluate_oracle(world: &World, test: &LabeledDataset) -> Result<EvalReport, PipelineError> {
    Ok(pairwise_accuracy(&OracleScorer { choice: &world.choice }, test)?)
}

/// Score tables for every rung, named after the rungs.
pub fn ladder_tables(
    world: &World,
    cfg: &PipelineConfig,
    scorers: &[Box<dyn Scorer + '_>],
) -> Result<Vec<ScoreTable>, PipelineError> {
    let refs: Vec<&dyn Scorer> = scorers.iter().map(|s| s.as_ref() as &dyn Scorer).collect();
    let mut tables = ScoreTable::build_many(&refs, &world.market, &world.extractor)?;
    for (t, v) in tables.iter_mut().zip(&cfg.eval.ladder) {
        t.name = v.name().to_string();
    }
    Ok(tables)
}

/// Per-user logged conversion when `eval.ab_matched` is set.
pub fn ab_covariate(world: &World, cfg: &PipelineConfig, logs: &Logs) -> Option<Vec<f64>> {
    cfg.eval
        .ab_matched
        .then(|| user_conversion(world.market.users.len(), &logs.cards))
}

/// A/B test of two score tables as top-k ranking policies.
pub fn ab_test(
    world: &World,
    cfg: &PipelineConfig,
    control: &ScoreTable,
    variant: &ScoreTable,
    covariate: Option<&[f64]>,
    seed: u64,
) -> Result<AbReport, PipelineError> {
    let k = cfg.dataset.display_k;
    let (c, v) = (RankingPolicy { table: control, k }, RankingPolicy { table: variant, k });
    let ab = AbConfig {
        n_sessions: cfg.eval.ab_sessions,
        seed: derive_seed(seed, &[AB]),
        design: cfg.eval.ab_design,
        covariate: covariate.map(<[f64]>::to_vec),
    };
    Ok(simulate_ab_test(
        &world.simulator(),
        (&control.name, &c),
        (&variant.name, &v),
        &ab,
    )?)
}

/// Everything one ladder seed produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub logged_sessions: usize,
    pub exploration_sessions: usize,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub evals: Vec<EvalReport>,
    pub oracle: EvalReport,
    pub ab: Vec<AbReport>,
    pub correlation: CorrelationReport,
}

pub fn run_seed(cfg: &PipelineConfig, seed: u64) -> Result<SeedRun, PipelineError> {
    let world = World::generate(cfg, seed)?;
    let logs = log_sessions(&world, cfg, seed)?;
    let data = build_datasets(&world, &logs, cfg, seed)?;
    let models = train_ladder(cfg, &data.train, seed)?;
    let scorers = ladder_scorers(&world, cfg, &models)?;
    let evals = evaluate_ladder(cfg, &scorers, &data.test)?;
    let oracle = evaluate_oracle(&world, &data.test)?;
    let tables = ladder_tables(&world, cfg, &scorers)?;
    let covariate = ab_covariate(&world, cfg, &logs);
    let mut ab = Vec::new();
    let mut steps = Vec::new();
    for i in 1..tables.len() {
        let report = ab_test(&world, cfg, &tables[i - 1], &tables[i], covariate.as_deref(), seed)?;
        steps.push(LadderStep::new(
            evals[i - 1].pairwise_accuracy,
            evals[i].pairwise_accuracy,
            &report,
        ));
        ab.push(report);
    }
    Ok(SeedRun {
        seed,
        logged_sessions: logs.cards.len(),
        exploration_sessions: logs.cards.iter().filter(|e| e.exploration_flag).count(),
        train_pairs: data.train.n_pairs(),
        test_pairs: data.test.n_pairs(),
        evals,
        oracle,
        ab,
        correlation: offline_online_correlation(steps)?,
    })
}

/// The ladder experiment over `ladder_seeds` consecutive seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub seeds: Vec<SeedRun>,
    /// Step-wise seed averages and their correlation.
    pub averaged: CorrelationReport,
}

pub fn run_ladder(cfg: &PipelineConfig) -> Result<LadderReport, PipelineError> {
    run_ladder_with(cfg, |_| {})
}

/// [`run_ladder`], calling `progress` after each seed.
pub fn run_ladder_with(cfg: &PipelineConfig, mut progress: impl FnMut(&SeedRun)) -> Result<LadderReport, PipelineError> {
    cfg.validate()?;
    let mut seeds = Vec::with_capacity(cfg.eval.ladder_seeds);
    for i in 0..cfg.eval.ladder_seeds as u64 {
        let run = run_seed(cfg, cfg.seed.wrapping_add(i))?;
        progress(&run);
        seeds.push(run);
    }
    let averaged = average_reports(&seeds.iter().map(|s| s.correlation.clone()).collect::<Vec<_>>())?;
    Ok(LadderReport { seeds, averaged })
}
