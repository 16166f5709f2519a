//! Feature extraction for (user, collection, context) triples.

mod export;
mod extract;
mod schema;
mod stats;

use thiserror::Error;

use crate::embedding::EmbeddingError;

pub use export::{read_matrix, write_matrix};
pub use extract::{collection_vectors, FeatureConfig, FeatureExtractor, FeatureVector};
pub use schema::*;
pub use stats::{
    compute_collection_stats, dish_coverage, history_orders, shift_specificity, CollectionStats, StatsWindow,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("missing embedding: {0}")]
    MissingEmbedding(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("feature schema mismatch: expected fingerprint {expected:016x}, got {actual:016x}")]
    SchemaMismatch { expected: u64, actual: u64 },
    #[error("unknown feature {0}")]
    UnknownFeature(String),
    #[error("unknown id: {0}")]
    Unknown(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FeatureVector {
    /// Fails unless the vector was built against `schema`.
    pub fn check(&self, schema: &FeatureSchema) -> Result<(), FeatureError> {
        let expected = schema.fingerprint();
        if self.fingerprint != expected || self.values.len() != schema.len() {
            return Err(FeatureError::SchemaMismatch {
                expected,
                actual: self.fingerprint,
            });
        }
        Ok(())
    }
}
