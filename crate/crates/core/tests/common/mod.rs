//! Hand-built worlds for tests whose expected values are computed by hand.

#![allow(dead_code)]

use collrec_core::embedding::{build_item_embeddings, EmbeddingConfig, EmbeddingStore};
use collrec_core::features::{FeatureConfig, FeatureExtractor};
use collrec_core::marketplace::*;

pub struct Toy {
    pub m: Marketplace,
}

impl Toy {
    pub fn new(regions: usize, taxonomies: usize) -> Self {
        let cfg = MarketplaceConfig {
            regions,
            taxonomies,
            users: 1,
            restaurants: 1,
            dishes: 1,
            collections: 1,
            ..Default::default()
        };
        let mut m = generate_marketplace(&cfg, 0).unwrap();
        m.restaurants.clear();
        m.dishes.clear();
        m.users.clear();
        m.collections.clear();
        Toy { m }
    }

    /// A restaurant with one dish per entry of `dish_taxa`. Returns its id and
    /// the new dish ids.
    pub fn restaurant(&mut self, region: u16, fee: f64, dish_taxa: &[u16]) -> (RestaurantId, Vec<DishId>) {
        let id = RestaurantId(self.m.restaurants.len() as u32);
        let mut dish_ids = Vec::new();
        for &t in dish_taxa {
            let d = DishId(self.m.dishes.len() as u32);
            self.m.dishes.push(Dish {
                id: d,
                restaurant_id: id,
                taxonomy_id: TaxonomyId(t),
                price: 10.0,
                is_vegan: false,
            });
            dish_ids.push(d);
        }
        self.m.restaurants.push(Restaurant {
            id,
            region_id: RegionId(region),
            primary_taxonomy: TaxonomyId(dish_taxa[0]),
            delivery_fee: fee,
            dish_ids: dish_ids.clone(),
        });
        (id, dish_ids)
    }

    pub fn user(&mut self, region: u16, vegan: bool) -> UserId {
        let id = UserId(self.m.users.len() as u32);
        let n = self.m.taxonomies.len();
        self.m.users.push(User {
            id,
            region_id: RegionId(region),
            is_vegan: vegan,
            latent_taste: vec![vec![1.0 / n as f64; n]; MealShift::COUNT],
            price_sensitivity: 0.0,
            order_history: Vec::new(),
        });
        id
    }

    /// An organic order on `day` at `hour:00`.
    pub fn order(&mut self, user: UserId, dish: DishId, day: i64, hour: i64) {
        let timestamp = day * SECONDS_PER_DAY + hour * 3600;
        let u = &mut self.m.users[user.index()];
        u.order_history.push(Order {
            user_id: user,
            dish_id: dish,
            timestamp,
            meal_shift: meal_shift_of(timestamp),
            source: OrderSource::Organic,
            home_id: None,
            collection_id: None,
        });
        u.order_history.sort_by_key(|o| o.timestamp);
    }

    pub fn collection(&mut self, kind: CollectionKind, members: &[u32], filters: &[ThemeFilter]) -> CollectionId {
        let id = CollectionId(self.m.collections.len() as u32);
        self.m.collections.push(Collection {
            id,
            kind,
            member_ids: members.to_vec(),
            theme_filters: filters.to_vec(),
            eligible_homes: self.m.homes.iter().map(|h| h.id).collect(),
            title: format!("toy {}", id.0),
            surface: Surface::RedCard,
        });
        id
    }

    pub fn finish(self) -> Marketplace {
        self.m.validate().unwrap();
        self.m
    }
}

/// A store holding the given unit vectors for dishes `0..vectors.len()`.
pub fn store_of(vectors: &[Vec<f32>]) -> EmbeddingStore {
    let mut s = EmbeddingStore::new(vectors[0].len());
    for (i, v) in vectors.iter().enumerate() {
        s.insert(DishId(i as u32), v.clone()).unwrap();
    }
    s
}

pub fn unit(v: &[f64]) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / n) as f32).collect()
}

pub fn as_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// A small generated market with its item vectors and feature extractor.
pub fn small_world(seed: u64) -> (Marketplace, EmbeddingStore, FeatureExtractor) {
    let c = MarketplaceConfig {
        users: 150,
        restaurants: 40,
        dishes: 300,
        collections: 12,
        ..Default::default()
    };
    let m = generate_marketplace(&c, seed).unwrap();
    let cfg = EmbeddingConfig::default();
    let s = build_item_embeddings(&m, &cfg, seed).unwrap();
    let x = FeatureExtractor::build(&m, &s, &cfg, &FeatureConfig::default()).unwrap();
    (m, s, x)
}
