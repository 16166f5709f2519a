use std::collections::HashMap;

use rand::Rng as _;

use super::{DatasetError, LabeledDataset, LabeledPair, Provenance};
use crate::features::FeatureExtractor;
use crate::marketplace::{CollectionId, SessionEvent, Surface};
use crate::rng;

const CAROUSEL_NEGATIVE: u64 = 21;

fn emit(
    ds: &mut LabeledDataset,
    x: &FeatureExtractor,
    e: &SessionEvent,
    positive: CollectionId,
    negative: CollectionId,
    provenance: Provenance,
) -> Result<(), DatasetError> {
    let pos = x.extract(e.user_id, positive, &e.context)?;
    let neg = x.extract(e.user_id, negative, &e.context)?;
    ds.push(
        LabeledPair {
            session: e.session,
            user_id: e.user_id,
            context: e.context.clone(),
            positive,
            negative,
            home_id: e.context.home_id,
            provenance,
        },
        pos,
        neg,
    );
    Ok(())
}

/// One pair per exploration-flagged card session with a purchase: the
/// purchased collection against the other displayed one. Sessions that
/// displayed anything but exactly two collections are skipped.
pub fn build_unbiased_dataset(events: &[SessionEvent], x: &FeatureExtractor) -> Result<LabeledDataset, DatasetError> {
    let mut ds = LabeledDataset::empty(x.schema().clone());
    for e in events {
        if !e.exploration_flag || e.surface != Surface::RedCard {
            continue;
        }
        let (Some(bought), &[a, b]) = (e.purchased_collection_id, &e.displayed_collection_ids[..]) else {
            continue;
        };
        let negative = match bought {
            c if c == a => b,
            c if c == b => a,
            _ => continue,
        };
        emit(&mut ds, x, e, bought, negative, Provenance::Sampled)?;
    }
    Ok(ds)
}

/// One pair per carousel session with a purchase: the purchased category
/// against one other displayed category drawn uniformly. Sessions showing a
/// single category have no negative and are skipped.
pub fn build_carousel_dataset(
    events: &[SessionEvent],
    x: &FeatureExtractor,
    seed: u64,
) -> Result<LabeledDataset, DatasetError> {
    let mut ds = LabeledDataset::empty(x.schema().clone());
    for e in events {
        if e.surface != Surface::Carousel {
            continue;
        }
        let Some(bought) = e.purchased_collection_id else {
            continue;
        };
        let others: Vec<CollectionId> = e
            .displayed_collection_ids
            .iter()
            .copied()
            .filter(|&c| c != bought)
            .collect();
        if others.is_empty() || others.len() == e.displayed_collection_ids.len() {
            continue;
        }
        let mut rng = rng::stream(seed, &[CAROUSEL_NEGATIVE, e.session]);
        let negative = others[rng.random_range(0..others.len())];
        emit(&mut ds, x, e, bought, negative, Provenance::Carousel)?;
    }
    Ok(ds)
}

/// Re-verifies a dataset against the log it came from: every pair's
/// collections were co-displayed in one session, the positive was bought,
/// user, home and context match, rows carry the schema's fingerprint, and
/// positives make up exactly half of the rows globally and per home.
pub fn audit(ds: &LabeledDataset, events: &[SessionEvent]) -> Result<(), DatasetError> {
    let bad = |msg: String| Err(DatasetError::Invariant(msg));
    if ds.rows.len() != 2 * ds.pairs.len() {
        return bad(format!("{} rows for {} pairs", ds.rows.len(), ds.pairs.len()));
    }
    let fingerprint = ds.schema.fingerprint();
    for r in &ds.rows {
        r.check(&ds.schema)?;
        debug_assert_eq!(r.fingerprint, fingerprint);
    }
    let by_session: HashMap<u64, &SessionEvent> = events.iter().map(|e| (e.session, e)).collect();
    for p in &ds.pairs {
        let Some(e) = by_session.get(&p.session) else {
            return bad(format!("pair refers to unknown session {}", p.session));
        };
        let shown = &e.displayed_collection_ids;
        if p.positive == p.negative {
            return bad(format!("session {}: positive equals negative", p.session));
        }
        if e.purchased_collection_id != Some(p.positive) {
            return bad(format!("session {}: positive was not purchased", p.session));
        }
        if !shown.contains(&p.positive) || !shown.contains(&p.negative) {
            return bad(format!("session {}: pair not co-displayed", p.session));
        }
        if p.user_id != e.user_id || p.context != e.context || p.home_id != e.context.home_id {
            return bad(format!("session {}: user, home or context differ", p.session));
        }
        if p.provenance == Provenance::Sampled && !e.exploration_flag {
            return bad(format!("session {}: sampled pair from an unflagged session", p.session));
        }
    }
    let positives = (0..ds.rows.len()).filter(|&i| LabeledDataset::label(i) == 1).count();
    if 2 * positives != ds.rows.len() {
        return bad(format!("{positives} positives in {} rows", ds.rows.len()));
    }
    for (h, f) in ds.positive_fraction_by_home() {
        if f != 0.5 {
            return bad(format!("home {h}: positive fraction {f}"));
        }
    }
    Ok(())
}
