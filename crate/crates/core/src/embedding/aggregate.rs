use serde::{Deserialize, Serialize};

use super::{cosine, normalized_mean, to_f64, EmbeddingError, EmbeddingStore};
use crate::marketplace::{Collection, CollectionId, CollectionKind, DishId, Marketplace, RegionId, Restaurant, RestaurantId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    /// Country-wide: all members.
    Unified,
    /// Only members located in the region.
    Regional(RegionId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectionRepresentation {
    pub collection_id: CollectionId,
    pub vector: Vec<f64>,
    pub scope: Scope,
}

/// Normalized mean of the restaurant's dish vectors. Dishes are summed in
/// id order, so the listing order never matters.
pub fn restaurant_embedding(restaurant: &Restaurant, store: &EmbeddingStore) -> Result<Vec<f64>, EmbeddingError> {
    let mut ids = restaurant.dish_ids.clone();
    ids.sort_unstable();
    let vectors: Vec<Vec<f64>> = ids
        .iter()
        .filter_map(|d| store.get(*d))
        .map(to_f64)
        .collect();
    normalized_mean(vectors, store.dim(), || format!("restaurant {}", restaurant.id))
}

/// Dish collections average their dishes; restaurant collections average the
/// restaurant embeddings of their members.
pub fn collection_embedding(
    collection: &Collection,
    market: &Marketplace,
    store: &EmbeddingStore,
    scope: Scope,
) -> Result<CollectionRepresentation, EmbeddingError> {
    let in_scope = |r: RestaurantId| match scope {
        Scope::Unified => true,
        Scope::Regional(region) => market.restaurant(r).region_id == region,
    };
    let mut members = collection.member_ids.clone();
    members.sort_unstable();
    let vectors: Vec<Vec<f64>> = match collection.kind {
        CollectionKind::Dish => members
            .iter()
            .map(|&d| DishId(d))
            .filter(|d| in_scope(market.dish(*d).restaurant_id))
            .map(|d| store.require(d).map(to_f64))
            .collect::<Result<_, _>>()?,
        CollectionKind::Restaurant => members
            .iter()
            .map(|&r| RestaurantId(r))
            .filter(|r| in_scope(*r))
            .map(|r| restaurant_embedding(market.restaurant(r), store))
            .collect::<Result<_, _>>()?,
    };
    if vectors.is_empty() {
        return Err(match scope {
            Scope::Regional(region) => EmbeddingError::EmptyRegion {
                collection: collection.id.0,
                region: region.0,
            },
            Scope::Unified => EmbeddingError::Missing(format!("collection {} is empty", collection.id)),
        });
    }
    let vector = normalized_mean(vectors, store.dim(), || format!("collection {}", collection.id))?;
    Ok(CollectionRepresentation {
        collection_id: collection.id,
        vector,
        scope,
    })
}

/// Median, over regions holding members, of the cosine between the regional
/// and unified representations.
pub fn regional_variability(
    collection: &Collection,
    market: &Marketplace,
    store: &EmbeddingStore,
) -> Result<f64, EmbeddingError> {
    let unified = collection_embedding(collection, market, store, Scope::Unified)?;
    let mut sims = Vec::new();
    for &region in &market.regions {
        match collection_embedding(collection, market, store, Scope::Regional(region)) {
            Ok(rep) => sims.push(cosine(&rep.vector, &unified.vector)?),
            Err(EmbeddingError::EmptyRegion { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if sims.is_empty() {
        return Err(EmbeddingError::Missing(format!(
            "collection {} has no members in any region",
            collection.id
        )));
    }
    Ok(median(&mut sims))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
