use std::collections::{BTreeSet, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::Gamma;

use super::config::{MarketplaceConfig, ThemeSpec};
use super::types::*;
use super::{MarketError, Marketplace};
use crate::rng::{self, Rng as SeededRng};

const CUISINES: [&str; 16] = [
    "Japanese",
    "Brazilian",
    "Pizza",
    "Burgers",
    "Snacks",
    "Bakery",
    "Chinese",
    "Italian",
    "Arabic",
    "Healthy",
    "Desserts",
    "Acai",
    "Mexican",
    "Vegetarian",
    "Seafood",
    "Barbecue",
];

// Stream tags, one per generation stage.
const RESTAURANTS: u64 = 1;
const DISHES: u64 = 2;
const USERS: u64 = 3;
const HISTORY: u64 = 4;
const COLLECTIONS: u64 = 5;
const PRIORS: u64 = 6;

/// Builds a world from `config`; a pure function of `(config, seed)`.
pub fn generate_marketplace(config: &MarketplaceConfig, seed: u64) -> Result<Marketplace, MarketError> {
    config.validate()?;
    let n_tax = config.taxonomies;

    let taxonomies: Vec<Taxonomy> = (0..n_tax)
        .map(|i| Taxonomy {
            id: TaxonomyId(i as u16),
            name: CUISINES
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("Cuisine {i}")),
        })
        .collect();
    let regions: Vec<RegionId> = (0..config.regions).map(|i| RegionId(i as u16)).collect();
    let homes: Vec<Home> = config
        .homes
        .iter()
        .enumerate()
        .map(|(i, h)| Home {
            id: HomeId(i as u16),
            conversion_multiplier: h.conversion_multiplier,
            traffic_weight: h.traffic_weight,
        })
        .collect();

    let mut prng = rng::stream(seed, &[PRIORS]);
    // Which cuisines a region's restaurants lean towards.
    let region_mix: Vec<Vec<f64>> = (0..config.regions)
        .map(|_| {
            let d = dirichlet(1.0, n_tax, &mut prng);
            d.iter().map(|p| 0.5 / n_tax as f64 + 0.5 * p).collect()
        })
        .collect();
    // Market-wide taste per shift (e.g. bakery at breakfast).
    let shift_prior: Vec<Vec<f64>> = (0..MealShift::COUNT)
        .map(|_| dirichlet(config.taste.prior_concentration, n_tax, &mut prng))
        .collect();

    let (restaurants, dishes) = generate_catalog(config, seed, &region_mix)?;
    let users = generate_users(config, seed, &shift_prior, &restaurants, &dishes);
    let collections = generate_collections(config, seed, &taxonomies, &restaurants, &dishes)?;

    Ok(Marketplace {
        config: config.clone(),
        rng_seed: seed,
        now: config.history_days as i64 * SECONDS_PER_DAY,
        regions,
        taxonomies,
        homes,
        restaurants,
        dishes,
        users,
        collections,
    })
}

fn generate_catalog(
    config: &MarketplaceConfig,
    seed: u64,
    region_mix: &[Vec<f64>],
) -> Result<(Vec<Restaurant>, Vec<Dish>), MarketError> {
    let n_tax = config.taxonomies;
    let mut rng = rng::stream(seed, &[RESTAURANTS]);
    let mut region_of: Vec<u16> = (0..config.restaurants)
        .map(|i| (i % config.regions) as u16)
        .collect();
    region_of.shuffle(&mut rng);
    let free = exact_flags(config.restaurants, config.free_delivery_fraction, &mut rng);

    let mut restaurants = Vec::with_capacity(config.restaurants);
    for i in 0..config.restaurants {
        let region = region_of[i];
        // The first restaurants cover every cuisine once.
        let primary = if i < n_tax {
            i
        } else {
            weighted(&region_mix[region as usize], &mut rng)
        };
        let delivery_fee = if free[i] {
            0.0
        } else {
            cents(rng.random_range(1.0..=config.max_delivery_fee.max(1.0)))
        };
        restaurants.push(Restaurant {
            id: RestaurantId(i as u32),
            region_id: RegionId(region),
            primary_taxonomy: TaxonomyId(primary as u16),
            delivery_fee,
            dish_ids: Vec::new(),
        });
    }

    let mut rng = rng::stream(seed, &[DISHES]);
    let mut per_restaurant = vec![1usize; config.restaurants];
    for _ in config.restaurants..config.dishes {
        per_restaurant[rng.random_range(0..config.restaurants)] += 1;
    }
    let vegan = exact_flags(config.dishes, config.vegan_dish_fraction, &mut rng);
    let mut dishes = Vec::with_capacity(config.dishes);
    for (r, &count) in restaurants.iter_mut().zip(&per_restaurant) {
        for _ in 0..count {
            let id = DishId(dishes.len() as u32);
            let taxonomy = if rng.random::<f64>() < config.primary_taxonomy_share {
                r.primary_taxonomy
            } else {
                TaxonomyId(rng.random_range(0..n_tax) as u16)
            };
            let price = cents(rng.random_range(config.min_dish_price..=config.max_dish_price))
                .max(0.01);
            dishes.push(Dish {
                id,
                restaurant_id: r.id,
                taxonomy_id: taxonomy,
                price,
                is_vegan: vegan[id.index()],
            });
            r.dish_ids.push(id);
        }
    }
    Ok((restaurants, dishes))
}

fn generate_users(
    config: &MarketplaceConfig,
    seed: u64,
    shift_prior: &[Vec<f64>],
    restaurants: &[Restaurant],
    dishes: &[Dish],
) -> Vec<User> {
    let n_tax = config.taxonomies;
    let t = &config.taste;
    let mut rng = rng::stream(seed, &[USERS]);
    let mut region_of: Vec<u16> = (0..config.users)
        .map(|i| (i % config.regions) as u16)
        .collect();
    region_of.shuffle(&mut rng);
    let vegan = exact_flags(config.users, config.vegan_user_fraction, &mut rng);

    let mut users = Vec::with_capacity(config.users);
    for i in 0..config.users {
        let core = dirichlet(t.concentration, n_tax, &mut rng);
        let latent_taste: Vec<Vec<f64>> = (0..MealShift::COUNT)
            .map(|s| {
                let own = dirichlet(t.concentration, n_tax, &mut rng);
                let row: Vec<f64> = (0..n_tax)
                    .map(|k| {
                        t.global_weight * shift_prior[s][k]
                            + t.core_weight * core[k]
                            + t.shift_weight * own[k]
                    })
                    .collect();
                normalize(row)
            })
            .collect();
        users.push(User {
            id: UserId(i as u32),
            region_id: RegionId(region_of[i]),
            is_vegan: vegan[i],
            latent_taste,
            price_sensitivity: rng.random::<f64>() * config.max_price_sensitivity,
            order_history: Vec::new(),
        });
    }

    // Restaurants per (region, taxonomy) and dishes per (restaurant, taxonomy).
    let mut offer: Vec<Vec<Vec<RestaurantId>>> = vec![vec![Vec::new(); n_tax]; config.regions];
    let mut menu: HashMap<(RestaurantId, TaxonomyId), Vec<DishId>> = HashMap::new();
    for r in restaurants {
        let mut seen = BTreeSet::new();
        for &d in &r.dish_ids {
            let tax = dishes[d.index()].taxonomy_id;
            menu.entry((r.id, tax)).or_default().push(d);
            if seen.insert(tax) {
                offer[r.region_id.index()][tax.index()].push(r.id);
            }
        }
    }

    let shift_weights = WeightedIndex::new(config.shift_traffic).expect("validated");
    for user in &mut users {
        let mut rng = rng::stream(seed, &[HISTORY, user.id.0 as u64]);
        let local = &offer[user.region_id.index()];
        if local.iter().all(Vec::is_empty) {
            continue;
        }
        let n_orders = rng.random_range(config.min_orders_per_user..=config.max_orders_per_user);
        let mut used: Vec<Vec<RestaurantId>> = vec![Vec::new(); n_tax];
        for _ in 0..n_orders {
            let shift = MealShift::ALL[shift_weights.sample(&mut rng)];
            let day = rng.random_range(0..config.history_days as i64);
            let (lo, hi) = shift.window();
            let timestamp = day * SECONDS_PER_DAY + rng.random_range(lo..hi);

            let weights: Vec<f64> = (0..n_tax)
                .map(|k| {
                    if local[k].is_empty() {
                        0.0
                    } else {
                        user.latent_taste[shift.index()][k]
                    }
                })
                .collect();
            let tax = if weights.iter().sum::<f64>() > 0.0 {
                weighted(&weights, &mut rng)
            } else {
                let available: Vec<usize> = (0..n_tax).filter(|&k| !local[k].is_empty()).collect();
                *available.choose(&mut rng).expect("region offers something")
            };
            let restaurant = if !used[tax].is_empty() && rng.random::<f64>() < config.restaurant_loyalty
            {
                *used[tax].choose(&mut rng).unwrap()
            } else {
                *local[tax].choose(&mut rng).unwrap()
            };
            used[tax].push(restaurant);
            let options = &menu[&(restaurant, TaxonomyId(tax as u16))];
            let vegan_options: Vec<DishId> = if user.is_vegan {
                options
                    .iter()
                    .copied()
                    .filter(|d| dishes[d.index()].is_vegan)
                    .collect()
            } else {
                Vec::new()
            };
            let dish_id = if vegan_options.is_empty() {
                *options.choose(&mut rng).unwrap()
            } else {
                *vegan_options.choose(&mut rng).unwrap()
            };
            user.order_history.push(Order {
                user_id: user.id,
                dish_id,
                timestamp,
                meal_shift: shift,
                source: OrderSource::Organic,
                home_id: None,
                collection_id: None,
            });
        }
        user.order_history.sort_by_key(|o| o.timestamp);
    }
    users
}

#[derive(Clone, Copy)]
enum DefaultTheme {
    CuisineDish,
    CuisineRestaurant,
    FreeDelivery,
    Vegan,
    Mixed,
}

const ROTATION: [DefaultTheme; 8] = [
    DefaultTheme::CuisineDish,
    DefaultTheme::CuisineRestaurant,
    DefaultTheme::CuisineDish,
    DefaultTheme::FreeDelivery,
    DefaultTheme::CuisineRestaurant,
    DefaultTheme::Vegan,
    DefaultTheme::CuisineDish,
    DefaultTheme::Mixed,
];

fn generate_collections(
    config: &MarketplaceConfig,
    seed: u64,
    taxonomies: &[Taxonomy],
    restaurants: &[Restaurant],
    dishes: &[Dish],
) -> Result<Vec<Collection>, MarketError> {
    let mut rng = rng::stream(seed, &[COLLECTIONS]);
    let mut cuisine_order: Vec<u16> = (0..taxonomies.len() as u16).collect();
    cuisine_order.shuffle(&mut rng);
    let mut next_cuisine = 0usize;

    let explicit = !config.collection_themes.is_empty();
    let mut themes = Vec::with_capacity(config.collections);
    for i in 0..config.collections {
        let theme = if explicit {
            config.collection_themes[i % config.collection_themes.len()]
        } else {
            let mut cuisine = || {
                let t = cuisine_order[next_cuisine % cuisine_order.len()];
                next_cuisine += 1;
                t
            };
            match ROTATION[i % ROTATION.len()] {
                DefaultTheme::CuisineDish => ThemeSpec::CuisineDish { taxonomy: cuisine() },
                DefaultTheme::CuisineRestaurant => ThemeSpec::CuisineRestaurant { taxonomy: cuisine() },
                DefaultTheme::FreeDelivery => ThemeSpec::FreeDeliveryRestaurant,
                DefaultTheme::Vegan => ThemeSpec::VeganDish,
                DefaultTheme::Mixed => ThemeSpec::MixedDish,
            }
        };
        themes.push(theme);
    }

    let mut titles: HashMap<String, usize> = HashMap::new();
    let mut collections = Vec::with_capacity(config.collections + taxonomies.len());
    for (i, &theme) in themes.iter().enumerate() {
        let (mut kind, mut pool, mut filters, mut title) = theme_pool(theme, taxonomies, restaurants, dishes);
        if pool.is_empty() {
            if explicit {
                return Err(MarketError::Config(format!(
                    "collection theme {theme:?} has no candidate members"
                )));
            }
            (kind, pool, filters, title) = theme_pool(ThemeSpec::MixedDish, taxonomies, restaurants, dishes);
        }
        let size = rng
            .random_range(config.min_collection_size..=config.max_collection_size)
            .min(pool.len());
        let mut member_ids: Vec<u32> = index::sample(&mut rng, pool.len(), size)
            .into_iter()
            .map(|k| pool[k])
            .collect();
        member_ids.sort_unstable();

        let mut eligible_homes: Vec<HomeId> = (0..config.homes.len())
            .filter(|_| rng.random::<f64>() < config.home_eligibility)
            .map(|h| HomeId(h as u16))
            .collect();
        if eligible_homes.is_empty() {
            eligible_homes.push(HomeId(rng.random_range(0..config.homes.len()) as u16));
        }

        let seen = titles.entry(title.clone()).or_insert(0);
        *seen += 1;
        if *seen > 1 {
            title = format!("{title} {seen}");
        }
        collections.push(Collection {
            id: CollectionId(i as u32),
            kind,
            member_ids,
            theme_filters: filters,
            eligible_homes,
            title,
            surface: Surface::RedCard,
        });
    }

    // One carousel category per cuisine that has restaurants.
    let all_homes: Vec<HomeId> = (0..config.homes.len()).map(|h| HomeId(h as u16)).collect();
    for t in taxonomies {
        let members: Vec<u32> = restaurants
            .iter()
            .filter(|r| r.primary_taxonomy == t.id)
            .map(|r| r.id.0)
            .collect();
        if members.is_empty() {
            continue;
        }
        collections.push(Collection {
            id: CollectionId(collections.len() as u32),
            kind: CollectionKind::Restaurant,
            member_ids: members,
            theme_filters: Vec::new(),
            eligible_homes: all_homes.clone(),
            title: t.name.clone(),
            surface: Surface::Carousel,
        });
    }
    Ok(collections)
}

fn theme_pool(
    theme: ThemeSpec,
    taxonomies: &[Taxonomy],
    restaurants: &[Restaurant],
    dishes: &[Dish],
) -> (CollectionKind, Vec<u32>, Vec<ThemeFilter>, String) {
    let dish_ids = |pred: &dyn Fn(&Dish) -> bool| -> Vec<u32> {
        dishes.iter().filter(|d| pred(d)).map(|d| d.id.0).collect()
    };
    let rest_ids = |pred: &dyn Fn(&Restaurant) -> bool| -> Vec<u32> {
        restaurants.iter().filter(|r| pred(r)).map(|r| r.id.0).collect()
    };
    match theme {
        ThemeSpec::CuisineDish { taxonomy } => (
            CollectionKind::Dish,
            dish_ids(&|d| d.taxonomy_id.0 == taxonomy),
            Vec::new(),
            format!("Best of {}", taxonomies[taxonomy as usize].name),
        ),
        ThemeSpec::CuisineRestaurant { taxonomy } => (
            CollectionKind::Restaurant,
            rest_ids(&|r| r.primary_taxonomy.0 == taxonomy),
            Vec::new(),
            format!("{} restaurants", taxonomies[taxonomy as usize].name),
        ),
        ThemeSpec::FreeDeliveryRestaurant => (
            CollectionKind::Restaurant,
            rest_ids(&|r| r.has_free_delivery()),
            vec![ThemeFilter::FreeDeliveryOnly],
            "Free delivery".to_string(),
        ),
        ThemeSpec::VeganDish => (
            CollectionKind::Dish,
            dish_ids(&|d| d.is_vegan),
            vec![ThemeFilter::VeganOnly],
            "Vegan picks".to_string(),
        ),
        ThemeSpec::MixedDish => (
            CollectionKind::Dish,
            dish_ids(&|_| true),
            Vec::new(),
            "Chef's selection".to_string(),
        ),
    }
}

/// Exactly `round(fraction * n)` true flags in shuffled positions.
fn exact_flags(n: usize, fraction: f64, rng: &mut SeededRng) -> Vec<bool> {
    let k = ((fraction * n as f64).round() as usize).min(n);
    let mut flags: Vec<bool> = (0..n).map(|i| i < k).collect();
    flags.shuffle(rng);
    flags
}

fn dirichlet(alpha: f64, k: usize, rng: &mut SeededRng) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive concentration");
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    if draws.iter().sum::<f64>() > 0.0 {
        normalize(draws)
    } else {
        let mut one_hot = vec![0.0; k];
        one_hot[rng.random_range(0..k)] = 1.0;
        one_hot
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn weighted(weights: &[f64], rng: &mut SeededRng) -> usize {
    WeightedIndex::new(weights)
        .expect("weights are non-negative with a positive sum")
        .sample(rng)
}

fn cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MarketplaceConfig {
        MarketplaceConfig {
            users: 10,
            restaurants: 5,
            dishes: 20,
            collections: 4,
            ..Default::default()
        }
    }

    #[test]
    fn counts_echo_config() {
        let m = generate_marketplace(&tiny(), 1).unwrap();
        assert_eq!(m.users.len(), 10);
        assert_eq!(m.restaurants.len(), 5);
        assert_eq!(m.dishes.len(), 20);
        assert_eq!(m.surface_collections(Surface::RedCard).len(), 4);
        m.validate().unwrap();
    }

    #[test]
    fn exact_vegan_fraction() {
        let cfg = MarketplaceConfig {
            vegan_dish_fraction: 0.25,
            ..tiny()
        };
        let m = generate_marketplace(&cfg, 7).unwrap();
        assert_eq!(m.dishes.iter().filter(|d| d.is_vegan).count(), 5);
    }

    #[test]
    fn dirichlet_rows_are_on_the_simplex() {
        let mut rng = rng::stream(0, &[]);
        for alpha in [0.05, 0.3, 5.0] {
            let v = dirichlet(alpha, 9, &mut rng);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(v.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn explicit_theme_without_candidates_is_an_error() {
        let cfg = MarketplaceConfig {
            vegan_dish_fraction: 0.0,
            collection_themes: vec![ThemeSpec::VeganDish],
            ..tiny()
        };
        assert!(matches!(generate_marketplace(&cfg, 1), Err(MarketError::Config(_))));
    }
}
