use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident($inner:ty)) => {
        $(#[$m])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_type!(RegionId(u16));
id_type!(TaxonomyId(u16));
id_type!(RestaurantId(u32));
id_type!(DishId(u32));
id_type!(UserId(u32));
id_type!(CollectionId(u32));
id_type!(
    /// A homepage variant; each has its own baseline conversion.
    HomeId(u16)
);

/// Coarse time-of-day bucket. Variants are in clock order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MealShift {
    Dawn,
    Breakfast,
    Lunch,
    Snack,
    Dinner,
}

impl MealShift {
    pub const ALL: [MealShift; 5] = [
        MealShift::Dawn,
        MealShift::Breakfast,
        MealShift::Lunch,
        MealShift::Snack,
        MealShift::Dinner,
    ];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Left-closed `[start, end)` window in seconds after midnight.
    pub fn window(self) -> (i64, i64) {
        const H: i64 = 3600;
        match self {
            MealShift::Dawn => (0, 6 * H),
            MealShift::Breakfast => (6 * H, 11 * H),
            MealShift::Lunch => (11 * H, 15 * H),
            MealShift::Snack => (15 * H, 19 * H),
            MealShift::Dinner => (19 * H, 24 * H),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MealShift::Dawn => "dawn",
            MealShift::Breakfast => "breakfast",
            MealShift::Lunch => "lunch",
            MealShift::Snack => "snack",
            MealShift::Dinner => "dinner",
        }
    }
}

impl fmt::Display for MealShift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Maps a timestamp (seconds, local time) to its meal shift.
pub fn meal_shift_of(timestamp: i64) -> MealShift {
    let t = timestamp.rem_euclid(SECONDS_PER_DAY);
    MealShift::ALL
        .into_iter()
        .find(|s| t < s.window().1)
        .expect("windows cover the whole day")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OrderSource {
    Organic,
    Carousel,
    RedCard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub user_id: UserId,
    pub dish_id: DishId,
    pub timestamp: i64,
    pub meal_shift: MealShift,
    pub source: OrderSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_id: Option<HomeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collection_id: Option<CollectionId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub id: TaxonomyId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dish {
    pub id: DishId,
    pub restaurant_id: RestaurantId,
    pub taxonomy_id: TaxonomyId,
    pub price: f64,
    pub is_vegan: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Restaurant {
    pub id: RestaurantId,
    pub region_id: RegionId,
    pub primary_taxonomy: TaxonomyId,
    pub delivery_fee: f64,
    pub dish_ids: Vec<DishId>,
}

impl Restaurant {
    pub fn has_free_delivery(&self) -> bool {
        self.delivery_fee == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CollectionKind {
    Dish,
    Restaurant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThemeFilter {
    VeganOnly,
    FreeDeliveryOnly,
}

/// Where a collection is shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Surface {
    /// Curated collection cards on a homepage.
    RedCard,
    /// The category carousel; each entry is a cuisine category.
    Carousel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collection {
    pub id: CollectionId,
    pub kind: CollectionKind,
    /// Dish ids or restaurant ids, according to `kind`.
    pub member_ids: Vec<u32>,
    /// Sorted, without duplicates.
    pub theme_filters: Vec<ThemeFilter>,
    /// Sorted, without duplicates.
    pub eligible_homes: Vec<HomeId>,
    pub title: String,
    pub surface: Surface,
}

impl Collection {
    pub fn has_filter(&self, f: ThemeFilter) -> bool {
        self.theme_filters.contains(&f)
    }

    pub fn is_eligible(&self, home: HomeId) -> bool {
        self.eligible_homes.binary_search(&home).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Home {
    pub id: HomeId,
    /// Scales the attractiveness of every card shown on this home.
    pub conversion_multiplier: f64,
    /// Relative share of sessions landing on this home.
    pub traffic_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub region_id: RegionId,
    pub is_vegan: bool,
    /// One probability vector over taxonomies per meal shift, indexed by
    /// `MealShift::index`. Ground truth only.
    pub latent_taste: Vec<Vec<f64>>,
    pub price_sensitivity: f64,
    pub order_history: Vec<Order>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub meal_shift: MealShift,
    pub home_id: HomeId,
    pub region_id: RegionId,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub session: u64,
    pub user_id: UserId,
    pub context: Context,
    pub surface: Surface,
    pub displayed_collection_ids: Vec<CollectionId>,
    pub purchased_collection_id: Option<CollectionId>,
    pub purchased_dish_id: Option<DishId>,
    pub exploration_flag: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(h: i64, m: i64, s: i64) -> i64 {
        h * 3600 + m * 60 + s
    }

    #[test]
    fn shift_boundaries_are_left_closed() {
        assert_eq!(meal_shift_of(at(12, 30, 0)), MealShift::Lunch);
        assert_eq!(meal_shift_of(at(3, 0, 0)), MealShift::Dawn);
        assert_eq!(meal_shift_of(at(11, 0, 0)), MealShift::Lunch);
        assert_eq!(meal_shift_of(at(10, 59, 59)), MealShift::Breakfast);
        assert_eq!(meal_shift_of(at(0, 0, 0)), MealShift::Dawn);
        assert_eq!(meal_shift_of(at(6, 0, 0)), MealShift::Breakfast);
        assert_eq!(meal_shift_of(at(15, 0, 0)), MealShift::Snack);
        assert_eq!(meal_shift_of(at(19, 0, 0)), MealShift::Dinner);
        assert_eq!(meal_shift_of(at(23, 59, 59)), MealShift::Dinner);
    }

    #[test]
    fn shift_is_periodic_including_negative_times() {
        for t in [at(12, 30, 0), at(3, 0, 0), at(20, 0, 0)] {
            for d in [-3, -1, 1, 40] {
                assert_eq!(meal_shift_of(t), meal_shift_of(t + d * SECONDS_PER_DAY));
            }
        }
    }

    #[test]
    fn id_serializes_as_bare_number() {
        assert_eq!(serde_json::to_string(&DishId(7)).unwrap(), "7");
        assert_eq!(
            serde_json::to_string(&MealShift::Breakfast).unwrap(),
            "\"BREAKFAST\""
        );
    }
}
