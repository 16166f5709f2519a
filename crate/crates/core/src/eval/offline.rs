use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EvalError, Scorer};
use crate::dataset::LabeledDataset;
use crate::features::FeatureExtractor;
use crate::marketplace::{CollectionId, Context, HomeId, MealShift, UserId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub n_pairs: usize,
    /// Correct pairs, ties counting one half.
    pub correct: f64,
    pub accuracy: f64,
}

impl Breakdown {
    fn add(&mut self, credit: f64) {
        self.n_pairs += 1;
        self.correct += credit;
        self.accuracy = self.correct / self.n_pairs as f64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub pairwise_accuracy: f64,
    pub n_pairs: usize,
    pub correct: f64,
    pub per_home: BTreeMap<HomeId, Breakdown>,
    pub per_shift: BTreeMap<MealShift, Breakdown>,
}

/// Share of pairs whose positive outscores its negative; exact ties count
/// one half.
pub fn pairwise_accuracy<S: Scorer + ?Sized>(scorer: &S, test: &LabeledDataset) -> Result<EvalReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::Config("pairwise accuracy of an empty test set".into()));
    }
    let empty = Breakdown {
        n_pairs: 0,
        correct: 0.0,
        accuracy: 0.0,
    };
    let mut total = empty.clone();
    let mut per_home: BTreeMap<HomeId, Breakdown> = BTreeMap::new();
    let mut per_shift: BTreeMap<MealShift, Breakdown> = BTreeMap::new();
    for (k, p) in test.pairs.iter().enumerate() {
        let (pos_row, neg_row) = test.pair_rows(k);
        let pos = scorer.score(p.user_id, p.positive, &p.context, pos_row)?;
        let neg = scorer.score(p.user_id, p.negative, &p.context, neg_row)?;
        let credit = if pos > neg {
            1.0
        } else if pos == neg {
            0.5
        } else {
            0.0
        };
        total.add(credit);
        per_home.entry(p.home_id).or_insert_with(|| empty.clone()).add(credit);
        per_shift
            .entry(p.context.meal_shift)
            .or_insert_with(|| empty.clone())
            .add(credit);
    }
    Ok(EvalReport {
        model_id: scorer.name().to_string(),
        pairwise_accuracy: total.accuracy,
        n_pairs: total.n_pairs,
        correct: total.correct,
        per_home,
        per_shift,
    })
}

/// `eligible` by descending score, ties by ascending id.
pub fn rank_collections<S: Scorer + ?Sized>(
    scorer: &S,
    extractor: &FeatureExtractor,
    user: UserId,
    context: &Context,
    eligible: &[CollectionId],
) -> Result<Vec<CollectionId>, EvalError> {
    let mut scored = eligible
        .iter()
        .map(|&c| {
            let f = extractor.extract(user, c, context)?;
            Ok((scorer.score(user, c, context, &f)?, c))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    sort_ranked(&mut scored);
    Ok(scored.into_iter().map(|(_, c)| c).collect())
}

pub(crate) fn sort_ranked(scored: &mut [(f64, CollectionId)]) {
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
}
