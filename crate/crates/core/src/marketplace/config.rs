use serde::{Deserialize, Serialize};

use super::MarketError;

pub const MARKETPLACE_SCHEMA_VERSION: u32 = 1;

/// Everything the generator needs besides the seed.
///
/// Serialized as TOML; every key has a default, so a file only needs
/// `schema_version` plus whatever it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketplaceConfig {
    pub schema_version: u32,
    pub regions: usize,
    pub taxonomies: usize,
    pub restaurants: usize,
    pub dishes: usize,
    pub users: usize,
    /// Curated (card) collections. Carousel categories come on top of these.
    pub collections: usize,
    pub vegan_dish_fraction: f64,
    pub vegan_user_fraction: f64,
    pub free_delivery_fraction: f64,
    pub history_days: u32,
    pub min_orders_per_user: usize,
    pub max_orders_per_user: usize,
    pub min_collection_size: usize,
    pub max_collection_size: usize,
    pub min_dish_price: f64,
    pub max_dish_price: f64,
    pub max_delivery_fee: f64,
    pub max_price_sensitivity: f64,
    /// Share of a restaurant's dishes drawn from its primary taxonomy.
    pub primary_taxonomy_share: f64,
    /// Probability an order repeats a restaurant the user already used for
    /// that taxonomy.
    pub restaurant_loyalty: f64,
    /// Relative session/order volume per meal shift, in clock order
    /// (dawn, breakfast, lunch, snack, dinner).
    pub shift_traffic: [f64; 5],
    pub taste: TasteConfig,
    pub choice: ChoiceConfig,
    pub homes: Vec<HomeSpec>,
    /// Explicit collection themes; when empty a default rotation is used.
    pub collection_themes: Vec<ThemeSpec>,
    /// Probability a collection is eligible on any given home.
    pub home_eligibility: f64,
}

/// How per-shift tastes are mixed:
/// `taste[s] = normalize(global_weight * prior[s] + core_weight * core + shift_weight * own[s])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TasteConfig {
    pub global_weight: f64,
    pub core_weight: f64,
    pub shift_weight: f64,
    /// Dirichlet concentration for the user's core and per-shift tastes.
    pub concentration: f64,
    /// Dirichlet concentration for the market-wide per-shift prior.
    pub prior_concentration: f64,
}

/// Ground-truth choice model. A displayed collection `c` has attractiveness
/// `home_multiplier * position_factor * exp(utility(c) / temperature)` against
/// an outside option `exp(outside_utility / temperature)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChoiceConfig {
    pub temperature: f64,
    pub outside_utility: f64,
    pub taste_weight: f64,
    pub familiarity_weight: f64,
    /// Familiarity (orders per collection restaurant in the shift) is capped here.
    pub familiarity_cap: f64,
    pub vegan_bonus: f64,
    /// Attractiveness multiplier per carousel slot: slot `i` gets `decay^i`.
    pub carousel_position_decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomeSpec {
    pub conversion_multiplier: f64,
    pub traffic_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThemeSpec {
    CuisineDish { taxonomy: u16 },
    CuisineRestaurant { taxonomy: u16 },
    FreeDeliveryRestaurant,
    VeganDish,
    MixedDish,
}

impl Default for MarketplaceConfig {
    fn default() -> Self {
        MarketplaceConfig {
            schema_version: MARKETPLACE_SCHEMA_VERSION,
            regions: 4,
            taxonomies: 12,
            restaurants: 240,
            dishes: 2400,
            users: 2000,
            collections: 40,
            vegan_dish_fraction: 0.15,
            vegan_user_fraction: 0.1,
            free_delivery_fraction: 0.3,
            history_days: 90,
            min_orders_per_user: 0,
            max_orders_per_user: 60,
            min_collection_size: 6,
            max_collection_size: 20,
            min_dish_price: 8.0,
            max_dish_price: 60.0,
            max_delivery_fee: 9.0,
            max_price_sensitivity: 0.05,
            primary_taxonomy_share: 0.8,
            restaurant_loyalty: 0.6,
            shift_traffic: [0.03, 0.12, 0.35, 0.15, 0.35],
            taste: TasteConfig::default(),
            choice: ChoiceConfig::default(),
            homes: vec![
                HomeSpec {
                    conversion_multiplier: 1.0,
                    traffic_weight: 0.6,
                },
                HomeSpec {
                    conversion_multiplier: 0.5,
                    traffic_weight: 0.3,
                },
                HomeSpec {
                    conversion_multiplier: 0.25,
                    traffic_weight: 0.1,
                },
            ],
            collection_themes: Vec::new(),
            home_eligibility: 0.7,
        }
    }
}

impl Default for TasteConfig {
    fn default() -> Self {
        TasteConfig {
            global_weight: 0.2,
            core_weight: 0.5,
            shift_weight: 0.3,
            concentration: 0.3,
            prior_concentration: 1.0,
        }
    }
}

impl Default for ChoiceConfig {
    fn default() -> Self {
        ChoiceConfig {
            temperature: 0.03,
            outside_utility: 0.15,
            taste_weight: 1.0,
            familiarity_weight: 0.3,
            familiarity_cap: 1.0,
            vegan_bonus: 0.3,
            carousel_position_decay: 0.8,
        }
    }
}

impl MarketplaceConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, MarketError> {
        let cfg: MarketplaceConfig =
            toml::from_str(s).map_err(|e| MarketError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        fn fail<T>(msg: String) -> Result<T, MarketError> {
            Err(MarketError::Config(msg))
        }
        if self.schema_version != MARKETPLACE_SCHEMA_VERSION {
            return fail(format!(
                "unsupported marketplace schema_version {} (expected {})",
                self.schema_version, MARKETPLACE_SCHEMA_VERSION
            ));
        }
        for (name, v) in [
            ("regions", self.regions),
            ("taxonomies", self.taxonomies),
            ("restaurants", self.restaurants),
            ("dishes", self.dishes),
            ("users", self.users),
            ("collections", self.collections),
            ("homes", self.homes.len()),
            ("min_collection_size", self.min_collection_size),
            ("history_days", self.history_days as usize),
        ] {
            if v == 0 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        if self.taxonomies > u16::MAX as usize || self.regions > u16::MAX as usize {
            return fail("too many taxonomies or regions".into());
        }
        if self.homes.len() > u16::MAX as usize {
            return fail("too many homes".into());
        }
        if self.dishes < self.restaurants {
            return fail(format!(
                "dishes ({}) must be at least restaurants ({}) so every restaurant has a dish",
                self.dishes, self.restaurants
            ));
        }
        for (name, v) in [
            ("vegan_dish_fraction", self.vegan_dish_fraction),
            ("vegan_user_fraction", self.vegan_user_fraction),
            ("free_delivery_fraction", self.free_delivery_fraction),
            ("primary_taxonomy_share", self.primary_taxonomy_share),
            ("restaurant_loyalty", self.restaurant_loyalty),
            ("home_eligibility", self.home_eligibility),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.min_orders_per_user > self.max_orders_per_user {
            return fail("min_orders_per_user exceeds max_orders_per_user".into());
        }
        if self.min_collection_size > self.max_collection_size {
            return fail("min_collection_size exceeds max_collection_size".into());
        }
        if !(self.min_dish_price > 0.0 && self.min_dish_price <= self.max_dish_price) {
            return fail("dish prices must satisfy 0 < min_dish_price <= max_dish_price".into());
        }
        if !(self.max_delivery_fee > 0.0) {
            return fail("max_delivery_fee must be positive".into());
        }
        if !(self.max_price_sensitivity >= 0.0) {
            return fail("max_price_sensitivity must be non-negative".into());
        }
        if self.shift_traffic.iter().any(|&w| !(w >= 0.0)) || self.shift_traffic.iter().sum::<f64>() <= 0.0
        {
            return fail("shift_traffic must be non-negative with a positive sum".into());
        }
        for (i, h) in self.homes.iter().enumerate() {
            if !(h.conversion_multiplier > 0.0) || !(h.traffic_weight >= 0.0) {
                return fail(format!(
                    "home {i}: conversion_multiplier must be positive and traffic_weight non-negative"
                ));
            }
        }
        if self.homes.iter().map(|h| h.traffic_weight).sum::<f64>() <= 0.0 {
            return fail("home traffic weights must have a positive sum".into());
        }
        let t = &self.taste;
        if [t.global_weight, t.core_weight, t.shift_weight]
            .iter()
            .any(|&w| !(w >= 0.0))
            || t.global_weight + t.core_weight + t.shift_weight <= 0.0
        {
            return fail("taste weights must be non-negative with a positive sum".into());
        }
        if !(t.concentration > 0.0 && t.prior_concentration > 0.0) {
            return fail("taste concentrations must be positive".into());
        }
        let c = &self.choice;
        if !(c.temperature > 0.0) {
            return fail("choice.temperature must be positive".into());
        }
        if !(c.carousel_position_decay > 0.0 && c.carousel_position_decay <= 1.0) {
            return fail("choice.carousel_position_decay must lie in (0, 1]".into());
        }
        if !(c.familiarity_cap >= 0.0) {
            return fail("choice.familiarity_cap must be non-negative".into());
        }
        for (i, theme) in self.collection_themes.iter().enumerate() {
            if let ThemeSpec::CuisineDish { taxonomy } | ThemeSpec::CuisineRestaurant { taxonomy } =
                theme
            {
                if *taxonomy as usize >= self.taxonomies {
                    return fail(format!(
                        "collection theme {i} references missing taxonomy {taxonomy} (only {} exist)",
                        self.taxonomies
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips_through_toml() {
        let cfg = MarketplaceConfig::default();
        cfg.validate().unwrap();
        let back = MarketplaceConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = MarketplaceConfig::from_toml_str("schema_version = 1\nusers = 10\n").unwrap();
        assert_eq!(cfg.users, 10);
        assert_eq!(cfg.regions, MarketplaceConfig::default().regions);
    }

    #[test]
    fn zero_users_is_rejected() {
        let cfg = MarketplaceConfig {
            users: 0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(MarketError::Config(_))));
    }

    #[test]
    fn theme_with_missing_taxonomy_is_rejected() {
        let cfg = MarketplaceConfig {
            taxonomies: 3,
            collection_themes: vec![ThemeSpec::CuisineDish { taxonomy: 3 }],
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("missing taxonomy"), "{err}");
    }

    #[test]
    fn unknown_keys_and_versions_are_rejected() {
        assert!(MarketplaceConfig::from_toml_str("schema_version = 1\nuserz = 3\n").is_err());
        assert!(MarketplaceConfig::from_toml_str("schema_version = 9\n").is_err());
    }
}
