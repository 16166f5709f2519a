use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::{DatasetError, LabeledDataset};
use crate::marketplace::UserId;
use crate::rng;

const SPLIT: u64 = 31;

/// User-disjoint `(train, test)` split. `round(holdout * users)` users,
/// drawn by `seed`, go to the test side together with all their pairs.
pub fn split_dataset(
    ds: &LabeledDataset,
    holdout: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), DatasetError> {
    if !(holdout > 0.0 && holdout < 1.0) {
        return Err(DatasetError::Config(format!("holdout fraction {holdout} is outside (0, 1)")));
    }
    let mut users: Vec<UserId> = ds
        .pairs
        .iter()
        .map(|p| p.user_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    users.shuffle(&mut rng::stream(seed, &[SPLIT]));
    let n_test = (holdout * users.len() as f64).round() as usize;
    let test: BTreeSet<UserId> = users[..n_test].iter().copied().collect();
    Ok((
        ds.filter(|p| !test.contains(&p.user_id)),
        ds.filter(|p| test.contains(&p.user_id)),
    ))
}
