use std::collections::HashMap;

use super::offline::sort_ranked;
use super::{Candidate, EvalError, Scorer};
use crate::features::FeatureExtractor;
use crate::marketplace::{
    CollectionId, Context, Display, DisplayPolicy, DisplayRequest, Marketplace, MealShift, Surface, UserId,
};
use crate::rng::Rng;

/// Precomputed scores of every card collection for every (user, shift).
/// Valid for scorers that see the context only through its meal shift, as
/// all scorers in this crate do.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub name: String,
    collections: Vec<CollectionId>,
    slot: HashMap<CollectionId, usize>,
    /// `[user][shift][slot]`, flattened.
    scores: Vec<f64>,
}

impl ScoreTable {
    pub fn build<S: Scorer + ?Sized>(
        scorer: &S,
        market: &Marketplace,
        extractor: &FeatureExtractor,
    ) -> Result<Self, EvalError> {
        Ok(Self::build_many(&[scorer], market, extractor)?.remove(0))
    }

    /// One table per scorer, extracting each feature row once.
    pub fn build_many<S: Scorer + ?Sized>(
        scorers: &[&S],
        market: &Marketplace,
        extractor: &FeatureExtractor,
    ) -> Result<Vec<Self>, EvalError> {
        let collections = market.surface_collections(Surface::RedCard);
        let slot: HashMap<CollectionId, usize> = collections.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let mut scores = vec![Vec::with_capacity(market.users.len() * MealShift::COUNT * collections.len()); scorers.len()];
        for u in &market.users {
            let mut items = Vec::with_capacity(MealShift::COUNT * collections.len());
            for shift in MealShift::ALL {
                let context = Context {
                    meal_shift: shift,
                    home_id: market.homes[0].id,
                    region_id: u.region_id,
                    timestamp: market.now + shift.window().0,
                };
                for &c in &collections {
                    items.push(Candidate {
                        collection: c,
                        context: context.clone(),
                        features: extractor.extract_for_shift(u.id, c, shift)?,
                    });
                }
            }
            for (s, out) in scorers.iter().zip(scores.iter_mut()) {
                out.extend(s.score_many(u.id, &items)?);
            }
        }
        Ok(scorers
            .iter()
            .zip(scores)
            .map(|(s, scores)| ScoreTable {
                name: s.name().to_string(),
                collections: collections.clone(),
                slot: slot.clone(),
                scores,
            })
            .collect())
    }

    pub fn collections(&self) -> &[CollectionId] {
        &self.collections
    }

    /// Score of a card collection; `None` for collections off the card
    /// surface.
    pub fn get(&self, user: UserId, shift: MealShift, c: CollectionId) -> Option<f64> {
        let n = self.collections.len();
        let s = *self.slot.get(&c)?;
        Some(self.scores[(user.index() * MealShift::COUNT + shift.index()) * n + s])
    }

    /// `eligible` by descending score, ties by ascending id.
    pub fn rank(&self, user: UserId, shift: MealShift, eligible: &[CollectionId]) -> Vec<CollectionId> {
        let mut scored: Vec<(f64, CollectionId)> = eligible
            .iter()
            .map(|&c| (self.get(user, shift, c).unwrap_or(f64::NEG_INFINITY), c))
            .collect();
        sort_ranked(&mut scored);
        scored.into_iter().map(|(_, c)| c).collect()
    }
}

/// Shows the `k` best eligible collections according to a score table.
#[derive(Debug, Clone, Copy)]
pub struct RankingPolicy<'a> {
    pub table: &'a ScoreTable,
    pub k: usize,
}

impl DisplayPolicy for RankingPolicy<'_> {
    fn display(&self, req: &DisplayRequest<'_>, _: &mut Rng) -> Display {
        let mut ranked = self.table.rank(req.user.id, req.context.meal_shift, req.eligible);
        ranked.truncate(self.k);
        Display::ranked(ranked)
    }
}
