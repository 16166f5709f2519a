//! Synthetic food-delivery world: catalog, users with hidden tastes, curated
//! collections, and a session simulator driven by a ground-truth choice model.

mod choice;
mod config;
mod generate;
mod io;
mod simulate;
mod types;

use thiserror::Error;

pub use choice::{ChoiceModel, CollectionProfile};
pub use config::{
    ChoiceConfig, HomeSpec, MarketplaceConfig, TasteConfig, ThemeSpec, MARKETPLACE_SCHEMA_VERSION,
};
pub use generate::generate_marketplace;
pub use io::{read_events, write_events};
pub use simulate::{
    simulate_sessions, validate_display, Display, DisplayPolicy, DisplayRequest, FixedPolicy,
    OrderedPolicy, SessionConfig, Simulator, UniformRandomPolicy,
};
pub use types::*;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("policy violation in session {session}: {reason}")]
    PolicyViolation { session: u64, reason: String },
    #[error("invalid marketplace: {0}")]
    Invalid(String),
    #[error("malformed record: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An immutable generated world. Ids are dense: the entity with id `i` sits
/// at index `i` of its list.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Marketplace {
    pub config: MarketplaceConfig,
    pub rng_seed: u64,
    /// End of the generated history; sessions happen at or after this time.
    pub now: i64,
    pub regions: Vec<RegionId>,
    pub taxonomies: Vec<Taxonomy>,
    pub homes: Vec<Home>,
    pub restaurants: Vec<Restaurant>,
    pub dishes: Vec<Dish>,
    pub users: Vec<User>,
    /// Curated cards first, then one carousel category per cuisine.
    pub collections: Vec<Collection>,
}

impl Marketplace {
    pub fn dish(&self, id: DishId) -> &Dish {
        &self.dishes[id.index()]
    }

    pub fn restaurant(&self, id: RestaurantId) -> &Restaurant {
        &self.restaurants[id.index()]
    }

    pub fn user(&self, id: UserId) -> &User {
        &self.users[id.index()]
    }

    pub fn collection(&self, id: CollectionId) -> &Collection {
        &self.collections[id.index()]
    }

    pub fn home(&self, id: HomeId) -> &Home {
        &self.homes[id.index()]
    }

    pub fn user_ids(&self) -> Vec<UserId> {
        self.users.iter().map(|u| u.id).collect()
    }

    /// Collections shown on `surface`, in id order.
    pub fn surface_collections(&self, surface: Surface) -> Vec<CollectionId> {
        self.collections
            .iter()
            .filter(|c| c.surface == surface)
            .map(|c| c.id)
            .collect()
    }

    /// Collections shown on `surface` that may appear on `home`, in id order.
    pub fn eligible_collections(&self, home: HomeId, surface: Surface) -> Vec<CollectionId> {
        self.collections
            .iter()
            .filter(|c| c.surface == surface && c.is_eligible(home))
            .map(|c| c.id)
            .collect()
    }

    /// Distinct restaurants behind a collection, sorted.
    pub fn collection_restaurants(&self, c: &Collection) -> Vec<RestaurantId> {
        let mut out: Vec<RestaurantId> = match c.kind {
            CollectionKind::Restaurant => c.member_ids.iter().map(|&r| RestaurantId(r)).collect(),
            CollectionKind::Dish => c
                .member_ids
                .iter()
                .map(|&d| self.dishes[d as usize].restaurant_id)
                .collect(),
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Dishes a purchase through the collection can land on, sorted.
    pub fn collection_dishes(&self, c: &Collection) -> Vec<DishId> {
        let mut out: Vec<DishId> = match c.kind {
            CollectionKind::Dish => c.member_ids.iter().map(|&d| DishId(d)).collect(),
            CollectionKind::Restaurant => c
                .member_ids
                .iter()
                .flat_map(|&r| self.restaurants[r as usize].dish_ids.iter().copied())
                .collect(),
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Returns a copy whose user histories also contain the purchases made in
    /// `events`, each history kept in timestamp order.
    pub fn with_session_orders(&self, events: &[SessionEvent]) -> Marketplace {
        let mut next = self.clone();
        for e in events {
            if let (Some(c), Some(d)) = (e.purchased_collection_id, e.purchased_dish_id) {
                let source = match e.surface {
                    Surface::RedCard => OrderSource::RedCard,
                    Surface::Carousel => OrderSource::Carousel,
                };
                next.users[e.user_id.index()].order_history.push(Order {
                    user_id: e.user_id,
                    dish_id: d,
                    timestamp: e.context.timestamp,
                    meal_shift: e.context.meal_shift,
                    source,
                    home_id: (source == OrderSource::RedCard).then_some(e.context.home_id),
                    collection_id: Some(c),
                });
            }
        }
        for u in &mut next.users {
            u.order_history.sort_by_key(|o| o.timestamp);
        }
        next
    }

    /// Checks every structural invariant; used after loading from disk.
    pub fn validate(&self) -> Result<(), MarketError> {
        let bad = |m: String| Err(MarketError::Invalid(m));
        for (i, r) in self.regions.iter().enumerate() {
            if r.index() != i {
                return bad(format!("region id {r} at index {i}"));
            }
        }
        for (i, t) in self.taxonomies.iter().enumerate() {
            if t.id.index() != i {
                return bad(format!("taxonomy id {} at index {i}", t.id));
            }
        }
        for (i, h) in self.homes.iter().enumerate() {
            if h.id.index() != i {
                return bad(format!("home id {} at index {i}", h.id));
            }
        }
        for (i, r) in self.restaurants.iter().enumerate() {
            if r.id.index() != i
                || r.region_id.index() >= self.regions.len()
                || r.primary_taxonomy.index() >= self.taxonomies.len()
            {
                return bad(format!("restaurant {i} has a bad id, region or taxonomy"));
            }
            if r.dish_ids.is_empty() || !(r.delivery_fee >= 0.0) {
                return bad(format!("restaurant {i} has no dishes or a negative fee"));
            }
            for d in &r.dish_ids {
                if self.dishes.get(d.index()).map(|x| x.restaurant_id) != Some(r.id) {
                    return bad(format!("restaurant {i} lists dish {d} it does not own"));
                }
            }
        }
        let mut listed = 0usize;
        for r in &self.restaurants {
            listed += r.dish_ids.len();
        }
        if listed != self.dishes.len() {
            return bad("some dish is not listed by its restaurant".into());
        }
        for (i, d) in self.dishes.iter().enumerate() {
            if d.id.index() != i
                || d.restaurant_id.index() >= self.restaurants.len()
                || d.taxonomy_id.index() >= self.taxonomies.len()
                || !(d.price > 0.0)
            {
                return bad(format!("dish {i} is malformed"));
            }
        }
        for (i, u) in self.users.iter().enumerate() {
            if u.id.index() != i || u.region_id.index() >= self.regions.len() {
                return bad(format!("user {i} is malformed"));
            }
            if u.latent_taste.len() != MealShift::COUNT {
                return bad(format!("user {i} lacks a taste row per shift"));
            }
            for row in &u.latent_taste {
                let s: f64 = row.iter().sum();
                if row.len() != self.taxonomies.len()
                    || row.iter().any(|&p| !(p >= 0.0))
                    || (s - 1.0).abs() > 1e-9
                {
                    return bad(format!("user {i} has a taste row off the simplex"));
                }
            }
            for o in &u.order_history {
                if o.user_id != u.id
                    || o.dish_id.index() >= self.dishes.len()
                    || meal_shift_of(o.timestamp) != o.meal_shift
                {
                    return bad(format!("user {i} has an inconsistent order"));
                }
            }
        }
        for (i, c) in self.collections.iter().enumerate() {
            if c.id.index() != i || c.member_ids.is_empty() {
                return bad(format!("collection {i} has a bad id or no members"));
            }
            let limit = match c.kind {
                CollectionKind::Dish => self.dishes.len(),
                CollectionKind::Restaurant => self.restaurants.len(),
            };
            if c.member_ids.iter().any(|&m| m as usize >= limit) {
                return bad(format!("collection {i} references a missing member"));
            }
            if c.kind == CollectionKind::Dish
                && c.has_filter(ThemeFilter::VeganOnly)
                && c.member_ids.iter().any(|&d| !self.dishes[d as usize].is_vegan)
            {
                return bad(format!("vegan-only collection {i} holds a non-vegan dish"));
            }
            if c.eligible_homes.iter().any(|h| h.index() >= self.homes.len())
                || !c.eligible_homes.windows(2).all(|w| w[0] < w[1])
            {
                return bad(format!("collection {i} has bad eligible homes"));
            }
        }
        Ok(())
    }
}
