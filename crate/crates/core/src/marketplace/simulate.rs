use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng as _;

use super::choice::ChoiceModel;
use super::types::*;
use super::{MarketError, Marketplace};
use crate::rng::{self, Rng};

// Per-session stream tags. Keeping the context, policy and purchase draws on
// separate streams gives common random numbers across policies.
const CONTEXT: u64 = 11;
const POLICY: u64 = 12;
const CHOICE: u64 = 13;

/// What a policy sees when asked for a display.
pub struct DisplayRequest<'a> {
    pub session: u64,
    pub user: &'a User,
    pub context: &'a Context,
    pub surface: Surface,
    /// Collections eligible for the session's home and surface, in id order.
    pub eligible: &'a [CollectionId],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Display {
    pub collections: Vec<CollectionId>,
    pub exploration: bool,
}

impl Display {
    pub fn ranked(collections: Vec<CollectionId>) -> Self {
        Display {
            collections,
            exploration: false,
        }
    }
}

pub trait DisplayPolicy {
    fn display(&self, req: &DisplayRequest<'_>, rng: &mut Rng) -> Display;
}

impl<P: DisplayPolicy + ?Sized> DisplayPolicy for &P {
    fn display(&self, req: &DisplayRequest<'_>, rng: &mut Rng) -> Display {
        (**self).display(req, rng)
    }
}

impl<P: DisplayPolicy + ?Sized> DisplayPolicy for Box<P> {
    fn display(&self, req: &DisplayRequest<'_>, rng: &mut Rng) -> Display {
        (**self).display(req, rng)
    }
}

/// Shows `k` eligible collections drawn uniformly without replacement.
#[derive(Debug, Clone)]
pub struct UniformRandomPolicy {
    pub k: usize,
}

impl DisplayPolicy for UniformRandomPolicy {
    fn display(&self, req: &DisplayRequest<'_>, rng: &mut Rng) -> Display {
        let k = self.k.min(req.eligible.len());
        let picked = index::sample(rng, req.eligible.len(), k)
            .into_iter()
            .map(|i| req.eligible[i])
            .collect();
        Display::ranked(picked)
    }
}

/// Always shows the same list, whether or not it is eligible.
#[derive(Debug, Clone)]
pub struct FixedPolicy(pub Vec<CollectionId>);

impl DisplayPolicy for FixedPolicy {
    fn display(&self, _: &DisplayRequest<'_>, _: &mut Rng) -> Display {
        Display::ranked(self.0.clone())
    }
}

/// Shows the first `k` eligible collections in a fixed global order.
#[derive(Debug, Clone)]
pub struct OrderedPolicy {
    pub order: Vec<CollectionId>,
    pub k: usize,
}

impl DisplayPolicy for OrderedPolicy {
    fn display(&self, req: &DisplayRequest<'_>, _: &mut Rng) -> Display {
        let picked = self
            .order
            .iter()
            .copied()
            .filter(|c| req.eligible.binary_search(c).is_ok())
            .take(self.k)
            .collect();
        Display::ranked(picked)
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub n_sessions: usize,
    pub seed: u64,
    /// First day of the simulated period (seconds).
    pub start: i64,
    pub days: u32,
    pub surface: Surface,
    /// Users sessions are drawn from; all users when `None`.
    pub users: Option<Vec<UserId>>,
    /// Offset added to the session index, so several runs can share one
    /// numbering.
    pub first_session: u64,
}

impl SessionConfig {
    pub fn new(market: &Marketplace, n_sessions: usize, seed: u64) -> Self {
        SessionConfig {
            n_sessions,
            seed,
            start: market.now,
            days: 7,
            surface: Surface::RedCard,
            users: None,
            first_session: 0,
        }
    }
}

/// Runs sessions against a fixed market snapshot.
pub struct Simulator<'a> {
    pub market: &'a Marketplace,
    pub choice: &'a ChoiceModel,
}

impl<'a> Simulator<'a> {
    pub fn new(market: &'a Marketplace, choice: &'a ChoiceModel) -> Self {
        Simulator { market, choice }
    }

    /// Draws the user and context of session `session`. The draw depends only
    /// on `(seed, session)` and the size of the user pool.
    pub fn draw_context(&self, cfg: &SessionConfig, pool: &[UserId], session: u64) -> (UserId, Context) {
        let m = self.market;
        let mut rng = rng::stream(cfg.seed, &[CONTEXT, session]);
        let u: f64 = rng.random();
        let user = pool[((u * pool.len() as f64) as usize).min(pool.len() - 1)];
        let shift_w = WeightedIndex::new(m.config.shift_traffic).expect("validated config");
        let shift = MealShift::ALL[shift_w.sample(&mut rng)];
        let day = rng.random_range(0..cfg.days.max(1) as i64);
        let (lo, hi) = shift.window();
        let timestamp = cfg.start + day * SECONDS_PER_DAY + rng.random_range(lo..hi);
        let home_w =
            WeightedIndex::new(m.homes.iter().map(|h| h.traffic_weight)).expect("validated config");
        let home_id = m.homes[home_w.sample(&mut rng)].id;
        let context = Context {
            meal_shift: meal_shift_of(timestamp),
            home_id,
            region_id: m.user(user).region_id,
            timestamp,
        };
        (user, context)
    }

    pub fn run(&self, policy: &dyn DisplayPolicy, cfg: &SessionConfig) -> Result<Vec<SessionEvent>, MarketError> {
        let m = self.market;
        if cfg.n_sessions == 0 {
            return Ok(Vec::new());
        }
        let pool = match &cfg.users {
            Some(p) => p.clone(),
            None => m.user_ids(),
        };
        if pool.is_empty() {
            return Err(MarketError::Config("session user pool is empty".into()));
        }
        let eligible: Vec<Vec<CollectionId>> = m
            .homes
            .iter()
            .map(|h| m.eligible_collections(h.id, cfg.surface))
            .collect();

        let mut events = Vec::with_capacity(cfg.n_sessions);
        for i in 0..cfg.n_sessions as u64 {
            let session = cfg.first_session + i;
            let (user_id, context) = self.draw_context(cfg, &pool, session);
            let user = m.user(user_id);
            let eligible = &eligible[context.home_id.index()];
            let req = DisplayRequest {
                session,
                user,
                context: &context,
                surface: cfg.surface,
                eligible,
            };
            let mut policy_rng = rng::stream(cfg.seed, &[POLICY, session]);
            let display = policy.display(&req, &mut policy_rng);
            validate_display(session, &display.collections, eligible)?;

            let mut choice_rng = rng::stream(cfg.seed, &[CHOICE, session]);
            let probs = self
                .choice
                .purchase_probabilities(user_id, &context, cfg.surface, &display.collections);
            let pick = sample_index(&probs, choice_rng.random());
            let (purchased_collection_id, purchased_dish_id) = match display.collections.get(pick) {
                Some(&c) => (Some(c), self.pick_dish(user, c, context.meal_shift, &mut choice_rng)),
                None => (None, None),
            };
            events.push(SessionEvent {
                session,
                user_id,
                context,
                surface: cfg.surface,
                displayed_collection_ids: display.collections,
                purchased_collection_id,
                purchased_dish_id,
                exploration_flag: display.exploration,
            });
        }
        Ok(events)
    }

    /// A dish from the collection, local to the user's region when possible,
    /// weighted by the user's taste for its taxonomy.
    fn pick_dish(&self, user: &User, c: CollectionId, shift: MealShift, rng: &mut Rng) -> Option<DishId> {
        let m = self.market;
        let dishes = &self.choice.profile(c).dishes;
        let local: Vec<DishId> = dishes
            .iter()
            .copied()
            .filter(|d| m.restaurant(m.dish(*d).restaurant_id).region_id == user.region_id)
            .collect();
        let candidates = if local.is_empty() { dishes.clone() } else { local };
        let taste = &user.latent_taste[shift.index()];
        let weights: Vec<f64> = candidates
            .iter()
            .map(|d| taste[m.dish(*d).taxonomy_id.index()] + 1e-12)
            .collect();
        let w = WeightedIndex::new(&weights).ok()?;
        Some(candidates[w.sample(rng)])
    }
}

/// Index `i` such that `u` falls in the `i`-th cumulative bucket of `probs`.
fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` beyond the last bucket: take the last non-empty one.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// A display must hold distinct collections, each eligible for the session.
pub fn validate_display(session: u64, shown: &[CollectionId], eligible: &[CollectionId]) -> Result<(), MarketError> {
    let mut seen = HashSet::new();
    for c in shown {
        if eligible.binary_search(c).is_err() {
            return Err(MarketError::PolicyViolation {
                session,
                reason: format!("collection {c} is not eligible here"),
            });
        }
        if !seen.insert(*c) {
            return Err(MarketError::PolicyViolation {
                session,
                reason: format!("collection {c} displayed twice"),
            });
        }
    }
    Ok(())
}

/// Simulates `n_sessions` card sessions over the week after the market's
/// history, using the market's own choice model.
pub fn simulate_sessions(
    market: &Marketplace,
    policy: &dyn DisplayPolicy,
    n_sessions: usize,
    seed: u64,
) -> Result<Vec<SessionEvent>, MarketError> {
    let choice = ChoiceModel::new(market);
    Simulator::new(market, &choice).run(policy, &SessionConfig::new(market, n_sessions, seed))
}
