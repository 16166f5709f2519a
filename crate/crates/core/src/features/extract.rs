use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::schema::*;
use super::stats::{compute_collection_stats, history_orders, shift_specificity, CollectionStats, StatsWindow};
use super::FeatureError;
use crate::embedding::{
    collection_embedding, cosine, user_representations, EmbeddingConfig, EmbeddingError, EmbeddingStore,
    Scope, UserShiftRepresentation,
};
use crate::marketplace::{
    CollectionId, CollectionKind, Context, Marketplace, MealShift, RestaurantId, ThemeFilter, UserId,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Trailing window for collection statistics.
    pub window_days: u32,
    /// Include the extension columns (size, mean fee, order popularity).
    pub extensions: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            window_days: 28,
            extensions: true,
        }
    }
}

/// One row aligned to a schema, tagged with that schema's fingerprint.
/// Missing values are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub fingerprint: u64,
    pub values: Vec<f64>,
}

struct CollectionInfo {
    vector: Option<Vec<f64>>,
    is_dish: bool,
    size: usize,
    mean_fee: f64,
    restaurants: Vec<RestaurantId>,
    vegan_only: bool,
}

struct UserInfo {
    is_vegan: bool,
    /// Anchor vectors per shift; `None` without orders in the shift.
    anchors: Vec<Option<Vec<Vec<f64>>>>,
    /// Past orders per restaurant: total and per shift.
    visits: HashMap<RestaurantId, (u32, [u32; MealShift::COUNT])>,
}

/// What a schema column holds, resolved once from its name.
#[derive(Debug, Clone, Copy)]
enum Column {
    PopularityByShift,
    IsDish,
    FreeDeliveryFraction,
    ShiftSpecificity,
    Size,
    MeanFee,
    OrderPopularity,
    Similarity(usize),
    OrdersInRestaurants,
    VeganMatch,
    ShiftOrdersPerRestaurant,
    Shift(MealShift),
}

impl Column {
    fn resolve(name: &str) -> Option<Column> {
        Some(match name {
            POPULARITY_BY_SHIFT => Column::PopularityByShift,
            IS_DISH_COLLECTION => Column::IsDish,
            FREE_DELIVERY_ORDER_FRACTION => Column::FreeDeliveryFraction,
            SHIFT_SPECIFICITY => Column::ShiftSpecificity,
            COLLECTION_SIZE => Column::Size,
            MEAN_DELIVERY_FEE => Column::MeanFee,
            ORDER_POPULARITY => Column::OrderPopularity,
            ORDERS_IN_COLLECTION_RESTAURANTS => Column::OrdersInRestaurants,
            VEGAN_MATCH => Column::VeganMatch,
            SHIFT_ORDERS_PER_RESTAURANT => Column::ShiftOrdersPerRestaurant,
            _ => {
                if let Some(k) = SIMILARITY.iter().position(|s| *s == name) {
                    Column::Similarity(k)
                } else {
                    Column::Shift(*MealShift::ALL.iter().find(|s| shift_feature(**s) == name)?)
                }
            }
        })
    }
}

/// Computes feature vectors against a frozen snapshot of the market: user
/// histories and collection statistics as of `now`.
///
/// Features depend on the context only through its meal shift.
pub struct FeatureExtractor {
    schema: FeatureSchema,
    columns: Vec<Column>,
    fingerprint: u64,
    now: i64,
    collections: Vec<CollectionInfo>,
    stats: Vec<CollectionStats>,
    users: Vec<UserInfo>,
}

impl FeatureExtractor {
    /// Snapshot at `market.now`, with statistics over the market's own
    /// order histories.
    pub fn build(
        market: &Marketplace,
        store: &EmbeddingStore,
        embedding: &EmbeddingConfig,
        config: &FeatureConfig,
    ) -> Result<Self, FeatureError> {
        let now = market.now;
        let reps = user_representations(market, store, now, embedding.recency_lambda())?;
        let vectors = collection_vectors(market, store)?;
        let stats = compute_collection_stats(
            market,
            history_orders(market),
            StatsWindow {
                now,
                days: config.window_days,
            },
            &vectors,
            &reps,
        );
        Self::from_parts(
            FeatureSchema::canonical(config.extensions),
            market,
            vectors,
            stats,
            &reps,
            now,
        )
    }

    /// Assembles an extractor from precomputed pieces. `reps` is indexed by
    /// user then shift; `vectors` and `stats` by collection. Fails on a
    /// schema naming features this extractor does not know.
    pub fn from_parts(
        schema: FeatureSchema,
        market: &Marketplace,
        vectors: Vec<Option<Vec<f64>>>,
        stats: Vec<CollectionStats>,
        reps: &[Vec<Option<UserShiftRepresentation>>],
        now: i64,
    ) -> Result<Self, FeatureError> {
        let columns = schema
            .features
            .iter()
            .map(|f| Column::resolve(&f.name).ok_or_else(|| FeatureError::UnknownFeature(f.name.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let collections = market
            .collections
            .iter()
            .zip(vectors)
            .map(|(c, vector)| {
                let restaurants = market.collection_restaurants(c);
                let mean_fee = restaurants
                    .iter()
                    .map(|r| market.restaurant(*r).delivery_fee)
                    .sum::<f64>()
                    / restaurants.len().max(1) as f64;
                CollectionInfo {
                    vector,
                    is_dish: c.kind == CollectionKind::Dish,
                    size: c.member_ids.len(),
                    mean_fee,
                    restaurants,
                    vegan_only: c.has_filter(ThemeFilter::VeganOnly),
                }
            })
            .collect();
        let users = market
            .users
            .iter()
            .zip(reps)
            .map(|(u, r)| {
                let mut visits: HashMap<RestaurantId, (u32, [u32; MealShift::COUNT])> = HashMap::new();
                for o in u.order_history.iter().filter(|o| o.timestamp < now) {
                    let e = visits
                        .entry(market.dish(o.dish_id).restaurant_id)
                        .or_insert((0, [0; MealShift::COUNT]));
                    e.0 += 1;
                    e.1[o.meal_shift.index()] += 1;
                }
                UserInfo {
                    is_vegan: u.is_vegan,
                    anchors: r
                        .iter()
                        .map(|rep| {
                            rep.as_ref()
                                .map(|rep| rep.anchors.iter().map(|a| a.vector.clone()).collect())
                        })
                        .collect(),
                    visits,
                }
            })
            .collect();
        let fingerprint = schema.fingerprint();
        Ok(FeatureExtractor {
            schema,
            columns,
            fingerprint,
            now,
            collections,
            stats,
            users,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn now(&self) -> i64 {
        self.now
    }

    pub fn stats(&self, c: CollectionId) -> &CollectionStats {
        &self.stats[c.index()]
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn extract(&self, user: UserId, collection: CollectionId, context: &Context) -> Result<FeatureVector, FeatureError> {
        self.extract_for_shift(user, collection, context.meal_shift)
    }

    pub fn extract_for_shift(
        &self,
        user: UserId,
        collection: CollectionId,
        shift: MealShift,
    ) -> Result<FeatureVector, FeatureError> {
        let c = self
            .collections
            .get(collection.index())
            .ok_or_else(|| FeatureError::Unknown(format!("collection {collection}")))?;
        let u = self
            .users
            .get(user.index())
            .ok_or_else(|| FeatureError::Unknown(format!("user {user}")))?;
        let vector = c
            .vector
            .as_ref()
            .ok_or_else(|| FeatureError::MissingEmbedding(format!("collection {collection} has no vector")))?;
        let stats = &self.stats[collection.index()];

        let mut sims: Vec<f64> = match &u.anchors[shift.index()] {
            Some(anchors) => anchors
                .iter()
                .map(|a| cosine(a, vector).unwrap_or(f64::NAN))
                .collect(),
            None => Vec::new(),
        };
        sims.sort_by(|a, b| b.total_cmp(a));
        sims.resize(SIMILARITY.len(), f64::NAN);

        let (mut total, mut in_shift) = (0u32, 0u32);
        for r in &c.restaurants {
            if let Some((t, per)) = u.visits.get(r) {
                total += t;
                in_shift += per[shift.index()];
            }
        }

        let values = self
            .columns
            .iter()
            .map(|col| match *col {
                Column::PopularityByShift => stats.popularity_by_shift[shift.index()].unwrap_or(f64::NAN),
                Column::IsDish => c.is_dish as u8 as f64,
                Column::FreeDeliveryFraction => stats.free_delivery_order_fraction.unwrap_or(f64::NAN),
                Column::ShiftSpecificity => shift_specificity(stats, shift).unwrap_or(f64::NAN),
                Column::Size => c.size as f64,
                Column::MeanFee => c.mean_fee,
                Column::OrderPopularity => stats.orders_per_shift[shift.index()] as f64,
                Column::Similarity(k) => sims[k],
                Column::OrdersInRestaurants => total as f64,
                Column::VeganMatch => (u.is_vegan && c.vegan_only) as u8 as f64,
                Column::ShiftOrdersPerRestaurant => {
                    if c.restaurants.is_empty() {
                        0.0
                    } else {
                        in_shift as f64 / c.restaurants.len() as f64
                    }
                }
                Column::Shift(s) => (s == shift) as u8 as f64,
            })
            .collect();
        Ok(FeatureVector {
            fingerprint: self.fingerprint,
            values,
        })
    }
}

/// Unified vectors for every collection; `None` where the mean degenerates.
pub fn collection_vectors(market: &Marketplace, store: &EmbeddingStore) -> Result<Vec<Option<Vec<f64>>>, FeatureError> {
    market
        .collections
        .iter()
        .map(|c| match collection_embedding(c, market, store, Scope::Unified) {
            Ok(rep) => Ok(Some(rep.vector)),
            Err(EmbeddingError::Degenerate(_)) => Ok(None),
            Err(e) => Err(e.into()),
        })
        .collect()
}
