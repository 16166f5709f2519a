//! Item vectors and the aggregation rules built on them: restaurant and
//! collection means, per-shift user anchors, cosine similarity.

mod aggregate;
mod io;
mod user;

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marketplace::{DishId, Marketplace};
use crate::rng;

pub use aggregate::{
    collection_embedding, regional_variability, restaurant_embedding, CollectionRepresentation,
    Scope,
};
pub use user::{user_representations, user_shift_representation, Anchor, UserShiftRepresentation};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing embedding: {0}")]
    Missing(String),
    #[error("degenerate mean (zero vector): {0}")]
    Degenerate(String),
    #[error("collection {collection} has no members in region {region}")]
    EmptyRegion { collection: u32, region: u16 },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("vector has dimension {actual}, store expects {expected}")]
    Dimension { expected: usize, actual: usize },
    #[error("corrupt embedding file: {0}")]
    Corrupt(String),
    #[error("embedding file version {major}.{minor} is not supported (reader knows {supported}.x)")]
    Version { major: u16, minor: u16, supported: u16 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub dim: usize,
    /// Standard deviation of the per-coordinate noise around a taxonomy centroid.
    pub sigma: f64,
    /// Half-life of an order's weight in anchor selection.
    pub recency_half_life_days: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 32,
            sigma: 0.15,
            recency_half_life_days: 30.0,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim < 2 {
            return Err(EmbeddingError::Config(format!("dim must be >= 2, got {}", self.dim)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(EmbeddingError::Config("sigma must be finite and >= 0".into()));
        }
        if !(self.recency_half_life_days > 0.0) {
            return Err(EmbeddingError::Config("recency_half_life_days must be > 0".into()));
        }
        Ok(())
    }

    /// Decay rate per day, `ln 2 / half_life`.
    pub fn recency_lambda(&self) -> f64 {
        std::f64::consts::LN_2 / self.recency_half_life_days
    }
}

/// Unit-norm item vectors keyed by dish.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: BTreeMap<DishId, Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Stores `v`, which must have unit norm (within 1e-6).
    pub fn insert(&mut self, id: DishId, v: Vec<f32>) -> Result<(), EmbeddingError> {
        if v.len() != self.dim {
            return Err(EmbeddingError::Dimension {
                expected: self.dim,
                actual: v.len(),
            });
        }
        let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(EmbeddingError::Config(format!(
                "vector for dish {id} has norm {norm}, expected 1"
            )));
        }
        self.vectors.insert(id, v);
        Ok(())
    }

    pub fn get(&self, id: DishId) -> Option<&[f32]> {
        self.vectors.get(&id).map(Vec::as_slice)
    }

    pub(crate) fn require(&self, id: DishId) -> Result<&[f32], EmbeddingError> {
        self.get(id)
            .ok_or_else(|| EmbeddingError::Missing(format!("dish {id} has no vector")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (DishId, &[f32])> {
        self.vectors.iter().map(|(k, v)| (*k, v.as_slice()))
    }
}

/// Synthetic item vectors: each taxonomy gets a random unit centroid and each
/// dish is `normalize(centroid + sigma * z)` with `z ~ N(0, I)`.
pub fn build_item_embeddings(
    market: &Marketplace,
    config: &EmbeddingConfig,
    seed: u64,
) -> Result<EmbeddingStore, EmbeddingError> {
    config.validate()?;
    let dim = config.dim;
    let mut rng = rng::stream(seed, &[0xE3B]);
    let gauss = |rng: &mut rng::Rng| -> Vec<f64> {
        (0..dim).map(|_| StandardNormal.sample(rng)).collect()
    };
    let mut centroids = Vec::with_capacity(market.taxonomies.len());
    for _ in &market.taxonomies {
        let mut c = gauss(&mut rng);
        while normalize(&mut c).is_none() {
            c = gauss(&mut rng);
        }
        centroids.push(c);
    }
    let mut store = EmbeddingStore::new(dim);
    for dish in &market.dishes {
        let z = gauss(&mut rng);
        let mut v: Vec<f64> = centroids[dish.taxonomy_id.index()]
            .iter()
            .zip(&z)
            .map(|(c, n)| c + config.sigma * n)
            .collect();
        if normalize(&mut v).is_none() {
            v = centroids[dish.taxonomy_id.index()].clone();
        }
        store.insert(dish.id, v.iter().map(|&x| x as f32).collect())?;
    }
    Ok(store)
}

/// Scales `v` to unit norm in place; `None` when `v` is (numerically) zero.
pub fn normalize(v: &mut [f64]) -> Option<()> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 1e-12) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(())
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    debug_assert_eq!(a.len(), b.len());
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

pub(crate) fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Normalized mean of `vectors`, summed in the given order. A single vector
/// is returned untouched: inputs are unit vectors already, and renormalizing
/// would only perturb the last bits.
pub(crate) fn normalized_mean(
    vectors: impl IntoIterator<Item = Vec<f64>>,
    dim: usize,
    what: impl FnOnce() -> String,
) -> Result<Vec<f64>, EmbeddingError> {
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for v in vectors {
        for (s, x) in sum.iter_mut().zip(&v) {
            *s += x;
        }
        n += 1;
    }
    if n == 0 {
        return Err(EmbeddingError::Missing(what()));
    }
    if n == 1 {
        return Ok(sum);
    }
    sum.iter_mut().for_each(|x| *x /= n as f64);
    match normalize(&mut sum) {
        Some(()) => Ok(sum),
        None => Err(EmbeddingError::Degenerate(what())),
    }
}
