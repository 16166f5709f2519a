use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, UserShiftRepresentation};
use crate::marketplace::{CollectionId, Marketplace, MealShift, Order, SECONDS_PER_DAY};

/// Per-collection aggregates over a trailing window of orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionStats {
    pub total_orders: u64,
    /// Indexed by `MealShift::index`.
    pub orders_per_shift: [u64; MealShift::COUNT],
    /// Share of orders from free-delivery restaurants; `None` without orders.
    pub free_delivery_order_fraction: Option<f64>,
    /// Mean over users with a representation in the shift of their best
    /// anchor cosine to the collection; `None` when no user qualifies or the
    /// collection has no vector.
    pub popularity_by_shift: [Option<f64>; MealShift::COUNT],
}

/// Orders in `[now - days, now)` count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatsWindow {
    pub now: i64,
    pub days: u32,
}

impl StatsWindow {
    pub fn contains(&self, ts: i64) -> bool {
        ts < self.now && ts >= self.now - self.days as i64 * SECONDS_PER_DAY
    }
}

/// `orders_per_shift[shift] / total_orders`, or `None` without orders.
pub fn shift_specificity(stats: &CollectionStats, shift: MealShift) -> Option<f64> {
    (stats.total_orders > 0)
        .then(|| stats.orders_per_shift[shift.index()] as f64 / stats.total_orders as f64)
}

/// For each dish, the collections an order of it counts towards: dish
/// collections listing it and restaurant collections listing its restaurant.
pub fn dish_coverage(market: &Marketplace) -> Vec<Vec<CollectionId>> {
    let mut by_dish: Vec<Vec<CollectionId>> = vec![Vec::new(); market.dishes.len()];
    for c in &market.collections {
        for d in market.collection_dishes(c) {
            by_dish[d.index()].push(c.id);
        }
    }
    by_dish
}

/// Best anchor cosine; `None` without a vector on either side.
pub(crate) fn best_anchor_similarity(rep: &UserShiftRepresentation, vector: &[f64]) -> Option<f64> {
    rep.anchors
        .iter()
        .filter_map(|a| cosine(&a.vector, vector).ok())
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))))
}

/// Aggregates `orders` (those inside `window`) per collection.
/// `collection_vectors` and `reps` feed the embedding popularity; `reps` is
/// indexed by user then shift.
pub fn compute_collection_stats<'a>(
    market: &Marketplace,
    orders: impl IntoIterator<Item = &'a Order>,
    window: StatsWindow,
    collection_vectors: &[Option<Vec<f64>>],
    reps: &[Vec<Option<UserShiftRepresentation>>],
) -> Vec<CollectionStats> {
    let coverage = dish_coverage(market);
    let n = market.collections.len();
    let mut totals = vec![[0u64; MealShift::COUNT]; n];
    let mut free = vec![0u64; n];
    for o in orders {
        if !window.contains(o.timestamp) {
            continue;
        }
        let is_free = market
            .restaurant(market.dish(o.dish_id).restaurant_id)
            .has_free_delivery();
        for c in &coverage[o.dish_id.index()] {
            totals[c.index()][o.meal_shift.index()] += 1;
            free[c.index()] += is_free as u64;
        }
    }

    (0..n)
        .map(|i| {
            let total: u64 = totals[i].iter().sum();
            let popularity_by_shift = std::array::from_fn(|s| {
                let v = collection_vectors[i].as_ref()?;
                let (mut sum, mut k) = (0.0, 0usize);
                for per_user in reps {
                    if let Some(sim) = per_user[s].as_ref().and_then(|r| best_anchor_similarity(r, v)) {
                        sum += sim;
                        k += 1;
                    }
                }
                (k > 0).then(|| sum / k as f64)
            });
            CollectionStats {
                total_orders: total,
                orders_per_shift: totals[i],
                free_delivery_order_fraction: (total > 0).then(|| free[i] as f64 / total as f64),
                popularity_by_shift,
            }
        })
        .collect()
}

/// All orders in every user's history.
pub fn history_orders(market: &Marketplace) -> impl Iterator<Item = &Order> {
    market.users.iter().flat_map(|u| u.order_history.iter())
}
