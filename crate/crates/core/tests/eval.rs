mod common;

use std::collections::BTreeSet;

use collrec_core::dataset::*;
use collrec_core::eval::*;
use collrec_core::features::{FeatureExtractor, FeatureVector};
use collrec_core::marketplace::*;
use common::small_world;

/// A monotone transform of another scorer.
struct Mapped<S>(S, fn(f64) -> f64);

impl<S: Scorer> Scorer for Mapped<S> {
    fn name(&self) -> &str {
        "mapped"
    }
    fn score(&self, u: UserId, c: CollectionId, ctx: &Context, f: &FeatureVector) -> Result<f64, EvalError> {
        Ok((self.1)(self.0.score(u, c, ctx, f)?))
    }
}

struct Fixture {
    m: Marketplace,
    x: FeatureExtractor,
    choice: ChoiceModel,
    test: LabeledDataset,
}

fn fixture(seed: u64) -> Fixture {
    let (m, _, x) = small_world(seed);
    let choice = ChoiceModel::new(&m);
    let policy = ExplorationPolicy::new(0.5, UniformRandomPolicy { k: 3 }).unwrap();
    let events = Simulator::new(&m, &choice)
        .run(&policy, &SessionConfig::new(&m, 6000, seed))
        .unwrap();
    let test = build_unbiased_dataset(&events, &x).unwrap();
    Fixture { m, x, choice, test }
}

#[test]
fn constant_scorer_scores_one_half() {
    let f = fixture(1);
    let r = pairwise_accuracy(&ConstantScorer(0.7), &f.test).unwrap();
    assert_eq!(r.pairwise_accuracy, 0.5);
    assert_eq!(r.n_pairs, f.test.n_pairs());
}

#[test]
fn negated_oracle_mirrors_the_oracle() {
    let f = fixture(2);
    let oracle = OracleScorer { choice: &f.choice };
    let a = pairwise_accuracy(&oracle, &f.test).unwrap().pairwise_accuracy;
    let b = pairwise_accuracy(&Negated(OracleScorer { choice: &f.choice }), &f.test)
        .unwrap()
        .pairwise_accuracy;
    assert!(a > 0.5);
    assert!((a + b - 1.0).abs() < 1e-12, "{a} + {b}");
}

#[test]
fn accuracy_depends_only_on_score_order() {
    let f = fixture(3);
    let base = pairwise_accuracy(&OracleScorer { choice: &f.choice }, &f.test).unwrap();
    let transforms: [fn(f64) -> f64; 3] = [
        |s| 1.0 / (1.0 + (-s).exp()),
        |s| 3.0 * s - 7.0,
        |s| s.powi(3),
    ];
    for t in transforms {
        let r = pairwise_accuracy(&Mapped(OracleScorer { choice: &f.choice }, t), &f.test).unwrap();
        assert_eq!(r.pairwise_accuracy, base.pairwise_accuracy);
        assert_eq!(r.per_home, base.per_home);
        assert_eq!(r.per_shift, base.per_shift);
    }
}

#[test]
fn breakdowns_decompose_the_total_exactly() {
    let f = fixture(4);
    let r = pairwise_accuracy(&PopularityScorer { extractor: &f.x }, &f.test).unwrap();
    assert_eq!(r.correct / r.n_pairs as f64, r.pairwise_accuracy);
    for parts in [
        r.per_home.values().cloned().collect::<Vec<_>>(),
        r.per_shift.values().cloned().collect::<Vec<_>>(),
    ] {
        assert_eq!(parts.iter().map(|b| b.n_pairs).sum::<usize>(), r.n_pairs);
        assert_eq!(parts.iter().map(|b| b.correct).sum::<f64>(), r.correct);
        let weighted: f64 = parts.iter().map(|b| b.n_pairs as f64 * b.accuracy).sum::<f64>() / r.n_pairs as f64;
        assert!((weighted - r.pairwise_accuracy).abs() < 1e-12);
    }
}

#[test]
fn empty_test_sets_are_rejected() {
    let f = fixture(1);
    let empty = LabeledDataset::empty(f.x.schema().clone());
    assert!(matches!(pairwise_accuracy(&ConstantScorer(0.0), &empty), Err(EvalError::Config(_))));
}

#[test]
fn ranking_orders_by_score_then_id() {
    let f = fixture(5);
    let ctx = f.test.pairs[0].context.clone();
    let u = f.test.pairs[0].user_id;
    let ids: Vec<CollectionId> = [4, 1, 3].map(CollectionId).to_vec();
    assert_eq!(
        rank_collections(&ConstantScorer(1.0), &f.x, u, &ctx, &ids).unwrap(),
        [1, 3, 4].map(CollectionId).to_vec()
    );
    assert_eq!(
        rank_collections(&ConstantScorer(1.0), &f.x, u, &ctx, &ids[..1]).unwrap(),
        vec![CollectionId(4)]
    );
    let oracle = OracleScorer { choice: &f.choice };
    let ranked = rank_collections(&oracle, &f.x, u, &ctx, &ids).unwrap();
    let utils: Vec<f64> = ranked.iter().map(|c| f.choice.utility(u, *c, ctx.meal_shift)).collect();
    assert!(utils.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn score_tables_agree_with_direct_ranking() {
    let f = fixture(6);
    let oracle = OracleScorer { choice: &f.choice };
    let table = ScoreTable::build(&oracle, &f.m, &f.x).unwrap();
    for p in f.test.pairs.iter().take(50) {
        let eligible = f.m.eligible_collections(p.home_id, Surface::RedCard);
        assert_eq!(
            table.rank(p.user_id, p.context.meal_shift, &eligible),
            rank_collections(&oracle, &f.x, p.user_id, &p.context, &eligible).unwrap()
        );
    }
    let carousel = f.m.surface_collections(Surface::Carousel)[0];
    assert_eq!(table.get(UserId(0), MealShift::Lunch, carousel), None);
}

#[test]
fn identical_paired_arms_have_zero_lift() {
    let f = fixture(7);
    let table = ScoreTable::build(&PopularityScorer { extractor: &f.x }, &f.m, &f.x).unwrap();
    let p = RankingPolicy { table: &table, k: 3 };
    let cfg = AbConfig {
        n_sessions: 5000,
        seed: 3,
        design: AbDesign::Paired,
        covariate: None,
    };
    let r = simulate_ab_test(&Simulator::new(&f.m, &f.choice), ("a", &p), ("b", &p), &cfg).unwrap();
    assert_eq!(r.ccr_lift, 0.0);
    assert_eq!(r.control_purchases, r.variant_purchases);
    assert_eq!((r.z, r.p_value), (0.0, 1.0));
}

#[test]
fn user_split_arms_are_disjoint() {
    let f = fixture(8);
    let users = f.m.user_ids();
    let (c, v) = arm_pools(&users, 99, AbDesign::UserSplit, None);
    let (c, v): (BTreeSet<_>, BTreeSet<_>) = (c.into_iter().collect(), v.into_iter().collect());
    assert!(c.is_disjoint(&v));
    assert_eq!(c.len() + v.len(), users.len());
    assert!(c.len() > users.len() / 4 && v.len() > users.len() / 4);
    let (c2, _) = arm_pools(&users, 99, AbDesign::UserSplit, None);
    assert_eq!(c, c2.into_iter().collect());
}

#[test]
fn matched_split_pairs_neighbours_across_arms() {
    let f = fixture(8);
    let users = f.m.user_ids();
    // A covariate with ties, so the id tie-break matters.
    let x: Vec<f64> = users.iter().map(|u| (u.0 % 37) as f64).collect();
    let (c, v) = arm_pools(&users, 5, AbDesign::UserSplit, Some(&x));
    let (cs, vs): (BTreeSet<_>, BTreeSet<_>) = (c.iter().copied().collect(), v.iter().copied().collect());
    assert!(cs.is_disjoint(&vs));
    assert_eq!(cs.len() + vs.len(), users.len());
    assert!(c.len().abs_diff(v.len()) <= 1);
    let mut order = users.clone();
    order.sort_by(|a, b| x[a.index()].total_cmp(&x[b.index()]).then(a.cmp(b)));
    let rank = |u: &UserId| order.iter().position(|o| o == u).unwrap();
    for (i, (a, b)) in c.iter().zip(&v).enumerate() {
        let (ra, rb) = (rank(a), rank(b));
        assert_eq!(ra.min(rb), 2 * i);
        assert_eq!(ra.abs_diff(rb), 1);
    }
    // Which twin lands in which arm depends on the seed.
    let (c2, _) = arm_pools(&users, 6, AbDesign::UserSplit, Some(&x));
    assert_ne!(c, c2);
}

#[test]
fn user_conversion_is_smoothed_per_user() {
    let f = fixture(10);
    let p = UniformRandomPolicy { k: 2 };
    let events = Simulator::new(&f.m, &f.choice)
        .run(&p, &SessionConfig::new(&f.m, 400, 1))
        .unwrap();
    let conv = user_conversion(f.m.users.len(), &events);
    assert_eq!(conv.len(), f.m.users.len());
    for u in &f.m.users {
        let mine: Vec<_> = events.iter().filter(|e| e.user_id == u.id).collect();
        let bought = mine.iter().filter(|e| e.purchased_collection_id.is_some()).count();
        assert_eq!(conv[u.id.index()], (bought as f64 + 1.0) / (mine.len() as f64 + 2.0));
    }
}

#[test]
fn oracle_ranking_beats_popularity_and_its_reverse_loses() {
    let f = fixture(9);
    let oracle = OracleScorer { choice: &f.choice };
    let pop = PopularityScorer { extractor: &f.x };
    let anti = Negated(OracleScorer { choice: &f.choice });
    let refs: [&dyn Scorer; 3] = [&oracle, &pop, &anti];
    let tables = ScoreTable::build_many(&refs, &f.m, &f.x).unwrap();
    let policy = |t| RankingPolicy { table: t, k: 3 };
    let sim = Simulator::new(&f.m, &f.choice);
    let cfg = AbConfig {
        n_sessions: 20_000,
        seed: 5,
        design: AbDesign::UserSplit,
        covariate: None,
    };
    let up = simulate_ab_test(&sim, ("popularity", &policy(&tables[1])), ("oracle", &policy(&tables[0])), &cfg).unwrap();
    assert!(up.ccr_lift > 0.0 && up.p_value < 0.05, "{up:?}");
    assert_eq!(up.control_users + up.variant_users, f.m.users.len());
    let down = simulate_ab_test(&sim, ("popularity", &policy(&tables[1])), ("anti", &policy(&tables[2])), &cfg).unwrap();
    assert!(down.ccr_lift < 0.0, "{down:?}");
}

#[test]
fn too_few_sessions_is_a_configuration_error() {
    let f = fixture(1);
    let p = UniformRandomPolicy { k: 2 };
    let cfg = AbConfig {
        n_sessions: 1,
        seed: 0,
        design: AbDesign::UserSplit,
        covariate: None,
    };
    assert!(matches!(
        simulate_ab_test(&Simulator::new(&f.m, &f.choice), ("a", &p), ("b", &p), &cfg),
        Err(EvalError::Config(_))
    ));
}

#[test]
fn z_test_matches_a_hand_computation() {
    let (z, p) = two_proportion_z_test(50, 100, 60, 100);
    let se = (0.55f64 * 0.45 * 0.02).sqrt();
    assert!((z - 0.1 / se).abs() < 1e-12);
    assert!((p - 0.155218).abs() < 1e-5, "{p}");
    assert_eq!(two_proportion_z_test(0, 10, 0, 10), (0.0, 1.0));
}

fn step(diff: f64, lift: f64) -> LadderStep {
    LadderStep {
        control: "a".into(),
        variant: "b".into(),
        control_accuracy: 0.5,
        variant_accuracy: 0.5 + diff / 100.0,
        offline_diff_points: diff,
        ccr_lift: lift,
        p_value: 0.5,
    }
}

#[test]
fn reference_ladder_has_perfect_rank_correlation() {
    let r = offline_online_correlation(vec![step(3.20, 0.1151), step(5.50, 0.1832), step(2.22, 0.0630)]).unwrap();
    assert_eq!(r.rank_correlation, Some(1.0));
    assert!(r.signs_agree);
}

#[test]
fn spearman_handles_ties_and_degenerate_inputs() {
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
    assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
    assert_eq!(spearman(&[1.0], &[1.0]), None);
    let r = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    // Ranks (1, 2.5, 2.5, 4) against (1, 3, 2, 4).
    let expected = 4.5 / (4.5f64 * 5.0).sqrt();
    assert!((r - expected).abs() < 1e-12);
}

#[test]
fn correlation_needs_two_steps_and_tracks_signs() {
    assert!(offline_online_correlation(vec![step(1.0, 0.1)]).is_err());
    let r = offline_online_correlation(vec![step(1.0, 0.1), step(-1.0, 0.05)]).unwrap();
    assert!(!r.signs_agree);
    let flat = offline_online_correlation(vec![step(0.0, 0.0), step(0.0, 0.0)]).unwrap();
    assert!(flat.signs_agree);
    assert_eq!(flat.rank_correlation, None);
}

#[test]
fn averaging_is_step_wise() {
    let a = offline_online_correlation(vec![step(1.0, 0.1), step(3.0, 0.3)]).unwrap();
    let b = offline_online_correlation(vec![step(3.0, 0.1), step(1.0, 0.1)]).unwrap();
    let avg = average_reports(&[a.clone(), b]).unwrap();
    assert_eq!(avg.steps[0].offline_diff_points, 2.0);
    assert_eq!(avg.steps[1].offline_diff_points, 2.0);
    assert!((avg.steps[1].ccr_lift - 0.2).abs() < 1e-15);
    let short = offline_online_correlation(vec![step(1.0, 0.1), step(1.0, 0.1), step(1.0, 0.1)]).unwrap();
    assert!(average_reports(&[a, short]).is_err());
    assert!(average_reports(&[]).is_err());
}
