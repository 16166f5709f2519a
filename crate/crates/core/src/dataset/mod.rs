//! Labeled pair datasets from session logs: the carousel bootstrap and the
//! exploration-sampled pair protocol.

mod build;
mod export;
mod explore;
mod split;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureSchema, FeatureVector};
use crate::marketplace::{CollectionId, Context, HomeId, MarketError, UserId};

pub use build::{audit, build_carousel_dataset, build_unbiased_dataset};
pub use explore::ExplorationPolicy;
pub use export::{read_dataset, write_dataset, MATRIX_FILE, PAIRS_FILE, SCHEMA_FILE};
pub use split::split_dataset;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("refusing to merge {0:?} and {1:?} rows without allow_mixed")]
    MixedProvenance(Provenance, Provenance),
    #[error("dataset invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Carousel,
    Sampled,
}

/// A purchased collection and one co-displayed collection from the same
/// session and home.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub session: u64,
    pub user_id: UserId,
    pub context: Context,
    pub positive: CollectionId,
    pub negative: CollectionId,
    pub home_id: HomeId,
    pub provenance: Provenance,
}

/// Pairs and their feature rows. Pair `k` owns rows `2k` (positive, label 1)
/// and `2k + 1` (negative, label 0), so the dataset is balanced globally and
/// per home.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub schema: FeatureSchema,
    pub pairs: Vec<LabeledPair>,
    pub rows: Vec<FeatureVector>,
}

impl LabeledDataset {
    pub fn empty(schema: FeatureSchema) -> Self {
        LabeledDataset {
            schema,
            pairs: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn label(row: usize) -> u8 {
        row.is_multiple_of(2) as u8
    }

    pub fn labels(&self) -> Vec<f64> {
        (0..self.rows.len()).map(|i| Self::label(i) as f64).collect()
    }

    /// Positive and negative rows of pair `k`.
    pub fn pair_rows(&self, k: usize) -> (&FeatureVector, &FeatureVector) {
        (&self.rows[2 * k], &self.rows[2 * k + 1])
    }

    pub(crate) fn push(&mut self, pair: LabeledPair, positive: FeatureVector, negative: FeatureVector) {
        self.pairs.push(pair);
        self.rows.push(positive);
        self.rows.push(negative);
    }

    /// Provenances present, in order.
    pub fn provenances(&self) -> Vec<Provenance> {
        let mut p: Vec<Provenance> = self.pairs.iter().map(|p| p.provenance).collect();
        p.sort();
        p.dedup();
        p
    }

    /// Positive-row fraction per home.
    pub fn positive_fraction_by_home(&self) -> BTreeMap<HomeId, f64> {
        let mut counts: BTreeMap<HomeId, (usize, usize)> = BTreeMap::new();
        for (k, p) in self.pairs.iter().enumerate() {
            let e = counts.entry(p.home_id).or_default();
            for row in [2 * k, 2 * k + 1] {
                e.0 += Self::label(row) as usize;
                e.1 += 1;
            }
        }
        counts
            .into_iter()
            .map(|(h, (pos, n))| (h, pos as f64 / n as f64))
            .collect()
    }

    /// The pairs `keep` selects, with their rows.
    pub fn filter(&self, mut keep: impl FnMut(&LabeledPair) -> bool) -> Self {
        let mut out = Self::empty(self.schema.clone());
        for (k, p) in self.pairs.iter().enumerate() {
            if keep(p) {
                let (a, b) = self.pair_rows(k);
                out.push(p.clone(), a.clone(), b.clone());
            }
        }
        out
    }

    /// Concatenates two datasets over the same schema. Rows of different
    /// provenance only mix when `allow_mixed` is set.
    pub fn merge(mut self, other: LabeledDataset, allow_mixed: bool) -> Result<Self, DatasetError> {
        if self.schema != other.schema {
            return Err(FeatureError::SchemaMismatch {
                expected: self.schema.fingerprint(),
                actual: other.schema.fingerprint(),
            }
            .into());
        }
        if !allow_mixed {
            let mut all = self.provenances();
            all.extend(other.provenances());
            all.sort();
            all.dedup();
            if let [a, b, ..] = all[..] {
                return Err(DatasetError::MixedProvenance(a, b));
            }
        }
        self.pairs.extend(other.pairs);
        self.rows.extend(other.rows);
        Ok(self)
    }
}
