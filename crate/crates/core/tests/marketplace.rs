use collrec_core::marketplace::*;
use proptest::prelude::*;

fn small() -> MarketplaceConfig {
    MarketplaceConfig {
        users: 300,
        restaurants: 60,
        dishes: 400,
        collections: 12,
        ..Default::default()
    }
}

/// A market whose only card collections are two copies of the same members,
/// eligible everywhere.
fn twin_market() -> Marketplace {
    let mut m = generate_marketplace(&small(), 3).unwrap();
    let homes: Vec<HomeId> = m.homes.iter().map(|h| h.id).collect();
    let mut a = m.collections[0].clone();
    a.eligible_homes = homes;
    let mut b = a.clone();
    b.id = CollectionId(1);
    b.title.push_str(" (copy)");
    m.collections = vec![a, b];
    m.validate().unwrap();
    m
}

#[test]
fn regeneration_is_byte_identical() {
    let a = generate_marketplace(&small(), 42).unwrap();
    let b = generate_marketplace(&small(), 42).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let c = generate_marketplace(&small(), 43).unwrap();
    assert_ne!(a.to_json(), c.to_json());
}

#[test]
fn generated_world_satisfies_invariants() {
    let m = generate_marketplace(&small(), 5).unwrap();
    m.validate().unwrap();
    for o in m.users.iter().flat_map(|u| &u.order_history) {
        assert_eq!(meal_shift_of(o.timestamp), o.meal_shift);
        assert!(o.timestamp < m.now);
        let r = m.restaurant(m.dish(o.dish_id).restaurant_id);
        assert_eq!(r.region_id, m.user(o.user_id).region_id);
    }
    let free = m.restaurants.iter().filter(|r| r.delivery_fee == 0.0).count();
    assert_eq!(free, (0.3f64 * 60.0).round() as usize);
    let vegan_users = m.users.iter().filter(|u| u.is_vegan).count();
    assert_eq!(vegan_users, 30);
    // Every cuisine with restaurants has a carousel category.
    assert!(!m.surface_collections(Surface::Carousel).is_empty());
}

#[test]
fn marketplace_json_round_trips() {
    let m = generate_marketplace(&small(), 9).unwrap();
    let back = Marketplace::from_json(&m.to_json()).unwrap();
    assert!(back == m, "round trip changed the marketplace");
}

#[test]
fn zero_sessions_is_empty() {
    let m = generate_marketplace(&small(), 1).unwrap();
    let ev = simulate_sessions(&m, &UniformRandomPolicy { k: 3 }, 0, 1).unwrap();
    assert!(ev.is_empty());
}

#[test]
fn infinite_utility_forces_the_purchase() {
    let m = twin_market();
    let mut choice = ChoiceModel::new(&m);
    choice.set_utility_override(CollectionId(0), f64::INFINITY);
    let sim = Simulator::new(&m, &choice);
    let policy = FixedPolicy(vec![CollectionId(0)]);
    let ev = sim.run(&policy, &SessionConfig::new(&m, 2_000, 4)).unwrap();
    assert!(ev
        .iter()
        .all(|e| e.purchased_collection_id == Some(CollectionId(0)) && e.purchased_dish_id.is_some()));
}

#[test]
fn identical_collections_split_purchases_evenly() {
    let m = twin_market();
    let ev = simulate_sessions(&m, &UniformRandomPolicy { k: 2 }, 10_000, 8).unwrap();
    let first: Vec<CollectionId> = ev
        .iter()
        .filter_map(|e| e.purchased_collection_id)
        .collect();
    let n = first.len() as f64;
    assert!(n > 1_000.0, "too few purchases: {n}");
    let a = first.iter().filter(|c| **c == CollectionId(0)).count() as f64;
    let sigma = (n * 0.25).sqrt();
    assert!((a - n / 2.0).abs() <= 3.0 * sigma, "a={a} n={n}");
}

#[test]
fn higher_utility_wins_forced_choice() {
    let m = twin_market();
    let mut choice = ChoiceModel::new(&m);
    choice.set_utility_override(CollectionId(0), 0.6);
    choice.set_utility_override(CollectionId(1), 0.5);
    let sim = Simulator::new(&m, &choice);
    let ev = sim
        .run(&UniformRandomPolicy { k: 2 }, &SessionConfig::new(&m, 10_000, 2))
        .unwrap();
    let bought: Vec<_> = ev.iter().filter_map(|e| e.purchased_collection_id).collect();
    let a = bought.iter().filter(|c| **c == CollectionId(0)).count();
    assert!(a as f64 / bought.len() as f64 > 0.5);
}

#[test]
fn ineligible_display_is_a_policy_violation() {
    let mut m = twin_market();
    m.collections[1].eligible_homes = vec![HomeId(0)];
    let policy = FixedPolicy(vec![CollectionId(1)]);
    let err = simulate_sessions(&m, &policy, 500, 1).unwrap_err();
    assert!(matches!(err, MarketError::PolicyViolation { .. }), "{err}");
}

#[test]
fn simulation_is_deterministic_and_consistent() {
    let m = generate_marketplace(&small(), 11).unwrap();
    let policy = UniformRandomPolicy { k: 3 };
    let a = simulate_sessions(&m, &policy, 3_000, 5).unwrap();
    let b = simulate_sessions(&m, &policy, 3_000, 5).unwrap();
    assert_eq!(a, b);
    for e in &a {
        assert_eq!(meal_shift_of(e.context.timestamp), e.context.meal_shift);
        assert!(e.context.timestamp >= m.now);
        assert_eq!(e.context.region_id, m.user(e.user_id).region_id);
        if let Some(c) = e.purchased_collection_id {
            assert!(e.displayed_collection_ids.contains(&c));
            let dish = e.purchased_dish_id.unwrap();
            let members = m.collection_dishes(m.collection(c));
            assert!(members.contains(&dish));
        }
        for c in &e.displayed_collection_ids {
            assert!(m.collection(*c).is_eligible(e.context.home_id));
        }
    }
}

#[test]
fn session_orders_are_appended_in_time_order() {
    let m = generate_marketplace(&small(), 11).unwrap();
    let ev = simulate_sessions(&m, &UniformRandomPolicy { k: 3 }, 1_000, 5).unwrap();
    let bought = ev.iter().filter(|e| e.purchased_collection_id.is_some()).count();
    let next = m.with_session_orders(&ev);
    let before: usize = m.users.iter().map(|u| u.order_history.len()).sum();
    let after: usize = next.users.iter().map(|u| u.order_history.len()).sum();
    assert_eq!(after, before + bought);
    next.validate().unwrap();
    for u in &next.users {
        assert!(u.order_history.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }
    let red = next
        .users
        .iter()
        .flat_map(|u| &u.order_history)
        .filter(|o| o.source == OrderSource::RedCard);
    for o in red {
        assert!(o.home_id.is_some() && o.collection_id.is_some());
    }
}

#[test]
fn event_log_round_trips() {
    let m = generate_marketplace(&small(), 2).unwrap();
    let ev = simulate_sessions(&m, &UniformRandomPolicy { k: 2 }, 200, 3).unwrap();
    let mut buf = Vec::new();
    write_events(&mut buf, &ev).unwrap();
    assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), 200);
    let back = read_events(buf.as_slice()).unwrap();
    assert_eq!(back, ev);
}

#[test]
fn event_with_undisplayed_purchase_is_rejected() {
    let line = r#"{"session":0,"user_id":0,"context":{"meal_shift":"LUNCH","home_id":0,"region_id":0,"timestamp":43200},"surface":"RED_CARD","displayed_collection_ids":[1],"purchased_collection_id":2,"purchased_dish_id":0,"exploration_flag":false}"#;
    assert!(read_events(line.as_bytes()).is_err());
}

#[test]
fn carousel_position_lowers_purchase_share() {
    let m = twin_market();
    let choice = ChoiceModel::new(&m);
    let u = m.users[0].id;
    let ctx = Context {
        meal_shift: MealShift::Lunch,
        home_id: HomeId(0),
        region_id: m.users[0].region_id,
        timestamp: m.now + 12 * 3600,
    };
    let shown = [CollectionId(0), CollectionId(1)];
    let card = choice.purchase_probabilities(u, &ctx, Surface::RedCard, &shown);
    let carousel = choice.purchase_probabilities(u, &ctx, Surface::Carousel, &shown);
    assert!((card[0] - card[1]).abs() < 1e-12);
    assert!(carousel[0] > carousel[1]);
    for p in [&card, &carousel] {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn lower_homes_convert_less() {
    let m = twin_market();
    let choice = ChoiceModel::new(&m);
    let u = m.users[0].id;
    let mut ctx = Context {
        meal_shift: MealShift::Dinner,
        home_id: HomeId(0),
        region_id: m.users[0].region_id,
        timestamp: m.now + 20 * 3600,
    };
    let shown = [CollectionId(0)];
    let top = choice.purchase_probabilities(u, &ctx, Surface::RedCard, &shown)[0];
    ctx.home_id = HomeId(2);
    let low = choice.purchase_probabilities(u, &ctx, Surface::RedCard, &shown)[0];
    assert!(low < top);
}

proptest! {
    #[test]
    fn shift_matches_its_window(t in any::<i64>()) {
        let s = meal_shift_of(t);
        let (lo, hi) = s.window();
        let tod = t.rem_euclid(SECONDS_PER_DAY);
        prop_assert!(lo <= tod && tod < hi);
    }

    #[test]
    fn taste_rows_are_simplexes(seed in 0u64..1_000) {
        let cfg = MarketplaceConfig { users: 5, restaurants: 5, dishes: 10, collections: 2, ..Default::default() };
        let m = generate_marketplace(&cfg, seed).unwrap();
        for u in &m.users {
            for row in &u.latent_taste {
                prop_assert!(row.iter().all(|&p| p >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        m.validate().unwrap();
    }
}
