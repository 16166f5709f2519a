//! Offline pairwise accuracy, score-table ranking policies, the simulated
//! A/B harness and the offline/online correlation report.

mod ab;
mod ladder;
mod offline;
mod scorer;
mod table;

use thiserror::Error;

use crate::features::FeatureError;
use crate::marketplace::MarketError;

pub use ab::{
    arm_pools, in_variant_arm, simulate_ab_test, two_proportion_z_test, user_conversion, AbConfig, AbDesign, AbReport};
pub use ladder::{average_reports, offline_online_correlation, spearman, CorrelationReport, LadderStep};
pub use offline::{pairwise_accuracy, rank_collections, Breakdown, EvalReport};
pub use scorer::{Candidate, ConstantScorer, ModelScorer, Negated, OracleScorer, PopularityScorer, Scorer};
pub use table::{RankingPolicy, ScoreTable};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] collrec_gbdt::GbdtError),
    #[error(transparent)]
    Market(#[from] MarketError),
}
