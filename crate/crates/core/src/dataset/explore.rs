use rand::seq::index;
use rand::Rng as _;

use super::DatasetError;
use crate::marketplace::{Display, DisplayPolicy, DisplayRequest};
use crate::rng::Rng;

/// With probability `rate`, replaces the incumbent's display with a
/// uniformly drawn pair of eligible collections (in random order) and flags
/// the session; otherwise shows the incumbent's display unflagged.
#[derive(Debug, Clone)]
pub struct ExplorationPolicy<P> {
    rate: f64,
    incumbent: P,
}

impl<P: DisplayPolicy> ExplorationPolicy<P> {
    pub fn new(rate: f64, incumbent: P) -> Result<Self, DatasetError> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(DatasetError::Config(format!("exploration rate {rate} is outside (0, 1]")));
        }
        Ok(ExplorationPolicy { rate, incumbent })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl<P: DisplayPolicy> DisplayPolicy for ExplorationPolicy<P> {
    fn display(&self, req: &DisplayRequest<'_>, rng: &mut Rng) -> Display {
        // The exploration draw comes first so the decision does not depend on
        // how much randomness the incumbent consumes.
        let explore = rng.random::<f64>() < self.rate;
        if explore && req.eligible.len() >= 2 {
            let pair = index::sample(rng, req.eligible.len(), 2);
            return Display {
                collections: pair.into_iter().map(|i| req.eligible[i]).collect(),
                exploration: true,
            };
        }
        Display {
            exploration: false,
            ..self.incumbent.display(req, rng)
        }
    }
}
