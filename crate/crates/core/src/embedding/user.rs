use std::collections::BTreeMap;

use super::{to_f64, EmbeddingError, EmbeddingStore};
use crate::marketplace::{DishId, MealShift, Marketplace, TaxonomyId, User, UserId, SECONDS_PER_DAY};

/// Maximum number of anchors per representation.
pub const MAX_ANCHORS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub dish_id: DishId,
    pub taxonomy_id: TaxonomyId,
    pub vector: Vec<f64>,
}

/// Up to three anchor dishes from distinct taxonomies summarising what a user
/// orders in one meal shift.
#[derive(Debug, Clone, PartialEq)]
pub struct UserShiftRepresentation {
    pub user_id: UserId,
    pub meal_shift: MealShift,
    pub anchors: Vec<Anchor>,
}

/// Picks the anchors for `(user, shift)` from orders placed in that shift at
/// or before `now`.
///
/// Each order contributes `exp(-lambda * age_days)` to its taxonomy and to
/// its (taxonomy, dish). The three best taxonomies each contribute their best
/// dish. Ties go to the lower id. Returns `None` when the user has no orders
/// in the shift.
pub fn user_shift_representation(
    user: &User,
    shift: MealShift,
    market: &Marketplace,
    store: &EmbeddingStore,
    now: i64,
    lambda: f64,
) -> Result<Option<UserShiftRepresentation>, EmbeddingError> {
    let mut by_taxonomy: BTreeMap<TaxonomyId, f64> = BTreeMap::new();
    let mut by_dish: BTreeMap<(TaxonomyId, DishId), f64> = BTreeMap::new();
    for o in &user.order_history {
        if o.meal_shift != shift || o.timestamp > now {
            continue;
        }
        let age_days = (now - o.timestamp) as f64 / SECONDS_PER_DAY as f64;
        let w = (-lambda * age_days).exp();
        let tax = market.dish(o.dish_id).taxonomy_id;
        *by_taxonomy.entry(tax).or_insert(0.0) += w;
        *by_dish.entry((tax, o.dish_id)).or_insert(0.0) += w;
    }
    if by_taxonomy.is_empty() {
        return Ok(None);
    }
    let mut taxa: Vec<(TaxonomyId, f64)> = by_taxonomy.into_iter().collect();
    // Stable sort keeps ascending ids among equal scores.
    taxa.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut anchors = Vec::with_capacity(MAX_ANCHORS);
    for &(tax, _) in taxa.iter().take(MAX_ANCHORS) {
        let (dish_id, _) = by_dish
            .range((tax, DishId(0))..=(tax, DishId(u32::MAX)))
            .map(|((_, d), s)| (*d, *s))
            .fold(None, |best: Option<(DishId, f64)>, (d, s)| match best {
                Some((_, bs)) if bs >= s => best,
                _ => Some((d, s)),
            })
            .expect("taxonomy has at least one dish");
        anchors.push(Anchor {
            dish_id,
            taxonomy_id: tax,
            vector: to_f64(store.require(dish_id)?),
        });
    }
    Ok(Some(UserShiftRepresentation {
        user_id: user.id,
        meal_shift: shift,
        anchors,
    }))
}

/// Representations of every user in every shift, indexed by user then shift.
pub fn user_representations(
    market: &Marketplace,
    store: &EmbeddingStore,
    now: i64,
    lambda: f64,
) -> Result<Vec<Vec<Option<UserShiftRepresentation>>>, EmbeddingError> {
    market
        .users
        .iter()
        .map(|u| {
            MealShift::ALL
                .iter()
                .map(|&s| user_shift_representation(u, s, market, store, now, lambda))
                .collect()
        })
        .collect()
}
