use std::collections::HashMap;

use super::config::ChoiceConfig;
use super::types::*;
use super::Marketplace;

/// What the choice model needs to know about one collection.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectionProfile {
    /// Share of the collection's purchasable dishes in each taxonomy.
    pub taxonomy_histogram: Vec<f64>,
    pub restaurants: Vec<RestaurantId>,
    pub dishes: Vec<DishId>,
    /// Mean delivery fee over the distinct member restaurants.
    pub mean_fee: f64,
    pub vegan_only: bool,
}

impl CollectionProfile {
    pub fn new(market: &Marketplace, c: &Collection) -> Self {
        let restaurants = market.collection_restaurants(c);
        let dishes = market.collection_dishes(c);
        let mut taxonomy_histogram = vec![0.0; market.taxonomies.len()];
        for d in &dishes {
            taxonomy_histogram[market.dish(*d).taxonomy_id.index()] += 1.0;
        }
        let n = dishes.len().max(1) as f64;
        taxonomy_histogram.iter_mut().for_each(|x| *x /= n);
        let mean_fee = restaurants
            .iter()
            .map(|r| market.restaurant(*r).delivery_fee)
            .sum::<f64>()
            / restaurants.len().max(1) as f64;
        CollectionProfile {
            taxonomy_histogram,
            restaurants,
            dishes,
            mean_fee,
            vegan_only: c.has_filter(ThemeFilter::VeganOnly),
        }
    }
}

/// Ground-truth utilities and purchase probabilities.
///
/// `utility(u, c, s) = taste_weight * <taste[s], hist(c)>
///     + familiarity_weight * min(fam(u, c, s), familiarity_cap)
///     + vegan_bonus * [u vegan and c vegan-only]
///     - price_sensitivity(u) * mean_fee(c)`
///
/// where `fam` is the user's order count in the collection's restaurants
/// during the shift divided by the number of those restaurants. Histories are
/// read once, at construction.
#[derive(Debug, Clone)]
pub struct ChoiceModel {
    pub config: ChoiceConfig,
    profiles: Vec<CollectionProfile>,
    /// Per user: order count per (restaurant, shift).
    visits: Vec<HashMap<(RestaurantId, MealShift), u32>>,
    users: Vec<(bool, f64, Vec<Vec<f64>>)>,
    home_multiplier: Vec<f64>,
    overrides: HashMap<CollectionId, f64>,
}

impl ChoiceModel {
    pub fn new(market: &Marketplace) -> Self {
        Self::with_config(market, market.config.choice.clone())
    }

    pub fn with_config(market: &Marketplace, config: ChoiceConfig) -> Self {
        let profiles = market
            .collections
            .iter()
            .map(|c| CollectionProfile::new(market, c))
            .collect();
        let visits = market
            .users
            .iter()
            .map(|u| {
                let mut m = HashMap::new();
                for o in &u.order_history {
                    let r = market.dish(o.dish_id).restaurant_id;
                    *m.entry((r, o.meal_shift)).or_insert(0) += 1;
                }
                m
            })
            .collect();
        let users = market
            .users
            .iter()
            .map(|u| (u.is_vegan, u.price_sensitivity, u.latent_taste.clone()))
            .collect();
        ChoiceModel {
            config,
            profiles,
            visits,
            users,
            home_multiplier: market.homes.iter().map(|h| h.conversion_multiplier).collect(),
            overrides: HashMap::new(),
        }
    }

    /// Forces `collection`'s utility to `value` for every user and shift.
    pub fn set_utility_override(&mut self, collection: CollectionId, value: f64) {
        self.overrides.insert(collection, value);
    }

    pub fn profile(&self, c: CollectionId) -> &CollectionProfile {
        &self.profiles[c.index()]
    }

    pub fn familiarity(&self, user: UserId, c: CollectionId, shift: MealShift) -> f64 {
        let p = &self.profiles[c.index()];
        if p.restaurants.is_empty() {
            return 0.0;
        }
        let visits = &self.visits[user.index()];
        let n: u32 = p
            .restaurants
            .iter()
            .map(|r| visits.get(&(*r, shift)).copied().unwrap_or(0))
            .sum();
        n as f64 / p.restaurants.len() as f64
    }

    pub fn utility(&self, user: UserId, c: CollectionId, shift: MealShift) -> f64 {
        if let Some(&v) = self.overrides.get(&c) {
            return v;
        }
        let cfg = &self.config;
        let p = &self.profiles[c.index()];
        let (vegan, price_sensitivity, taste) = &self.users[user.index()];
        let affinity: f64 = taste[shift.index()]
            .iter()
            .zip(&p.taxonomy_histogram)
            .map(|(a, b)| a * b)
            .sum();
        let fam = self.familiarity(user, c, shift).min(cfg.familiarity_cap);
        let vegan_match = if *vegan && p.vegan_only { 1.0 } else { 0.0 };
        cfg.taste_weight * affinity + cfg.familiarity_weight * fam + cfg.vegan_bonus * vegan_match
            - price_sensitivity * p.mean_fee
    }

    /// Purchase probability of each displayed collection, followed by the
    /// no-purchase probability as the last entry.
    pub fn purchase_probabilities(
        &self,
        user: UserId,
        context: &Context,
        surface: Surface,
        displayed: &[CollectionId],
    ) -> Vec<f64> {
        let utils: Vec<f64> = displayed
            .iter()
            .map(|c| self.utility(user, *c, context.meal_shift))
            .collect();
        let mut out = vec![0.0; displayed.len() + 1];
        let n_inf = utils.iter().filter(|u| **u == f64::INFINITY).count();
        if n_inf > 0 {
            for (o, u) in out.iter_mut().zip(&utils) {
                if *u == f64::INFINITY {
                    *o = 1.0 / n_inf as f64;
                }
            }
            return out;
        }
        let t = self.config.temperature;
        let ln_home = self.home_multiplier[context.home_id.index()].ln();
        let ln_decay = self.config.carousel_position_decay.ln();
        let mut logits: Vec<f64> = utils
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let position = match surface {
                    Surface::Carousel => i as f64 * ln_decay,
                    Surface::RedCard => 0.0,
                };
                ln_home + position + u / t
            })
            .collect();
        logits.push(self.config.outside_utility / t);
        let max = logits
            .iter()
            .copied()
            .filter(|l| l.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (o, l) in out.iter_mut().zip(&logits) {
            *o = (l - max).exp();
            total += *o;
        }
        out.iter_mut().for_each(|p| *p /= total);
        out
    }
}
