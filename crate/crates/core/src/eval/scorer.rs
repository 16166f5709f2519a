use collrec_gbdt::{GbdtModel, Matrix};

use super::EvalError;
use crate::features::{FeatureError, FeatureExtractor, FeatureSchema, FeatureVector};
use crate::marketplace::{ChoiceModel, CollectionId, Context, UserId};

/// A collection to score for some user, with its full-schema row.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub collection: CollectionId,
    pub context: Context,
    pub features: FeatureVector,
}

/// Scores one (user, collection, context) triple; higher ranks first.
/// `features` is the full-schema row for the triple.
pub trait Scorer {
    fn name(&self) -> &str;
    fn score(
        &self,
        user: UserId,
        collection: CollectionId,
        context: &Context,
        features: &FeatureVector,
    ) -> Result<f64, EvalError>;

    /// Scores of several candidates for one user, in order.
    fn score_many(&self, user: UserId, items: &[Candidate]) -> Result<Vec<f64>, EvalError> {
        items
            .iter()
            .map(|c| self.score(user, c.collection, &c.context, &c.features))
            .collect()
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn score(&self, u: UserId, c: CollectionId, ctx: &Context, f: &FeatureVector) -> Result<f64, EvalError> {
        (**self).score(u, c, ctx, f)
    }
    fn score_many(&self, u: UserId, items: &[Candidate]) -> Result<Vec<f64>, EvalError> {
        (**self).score_many(u, items)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn score(&self, u: UserId, c: CollectionId, ctx: &Context, f: &FeatureVector) -> Result<f64, EvalError> {
        (**self).score(u, c, ctx, f)
    }
    fn score_many(&self, u: UserId, items: &[Candidate]) -> Result<Vec<f64>, EvalError> {
        (**self).score_many(u, items)
    }
}

/// A trained model over a subset of the full schema's columns.
#[derive(Debug, Clone)]
pub struct ModelScorer {
    name: String,
    model: GbdtModel,
    full_fingerprint: u64,
    columns: Vec<usize>,
}

impl ModelScorer {
    /// Fails unless the model's features, in order, form a projection of
    /// `full` with the same flags.
    pub fn new(name: impl Into<String>, model: GbdtModel, full: &FeatureSchema) -> Result<Self, EvalError> {
        let (sub, columns) = full.project(&model.schema.feature_names)?;
        if sub.fingerprint() != model.fingerprint() {
            return Err(FeatureError::SchemaMismatch {
                expected: sub.fingerprint(),
                actual: model.fingerprint(),
            }
            .into());
        }
        Ok(ModelScorer {
            name: name.into(),
            model,
            full_fingerprint: full.fingerprint(),
            columns,
        })
    }

    pub fn model(&self) -> &GbdtModel {
        &self.model
    }

    fn check(&self, f: &FeatureVector) -> Result<(), EvalError> {
        if f.fingerprint != self.full_fingerprint {
            return Err(FeatureError::SchemaMismatch {
                expected: self.full_fingerprint,
                actual: f.fingerprint,
            }
            .into());
        }
        Ok(())
    }
}

impl Scorer for ModelScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, _: UserId, _: CollectionId, _: &Context, f: &FeatureVector) -> Result<f64, EvalError> {
        self.check(f)?;
        let row: Vec<f64> = self.columns.iter().map(|&i| f.values[i]).collect();
        Ok(self.model.predict(self.model.fingerprint(), &row)?)
    }

    fn score_many(&self, _: UserId, items: &[Candidate]) -> Result<Vec<f64>, EvalError> {
        let mut data = Vec::with_capacity(items.len() * self.columns.len());
        for c in items {
            self.check(&c.features)?;
            data.extend(self.columns.iter().map(|&i| c.features.values[i]));
        }
        let x = Matrix::new(data, items.len(), self.columns.len());
        Ok(self.model.predict_batch(self.model.fingerprint(), &x)?)
    }
}

/// The simulator's latent utility: the best any scorer can do.
pub struct OracleScorer<'a> {
    pub choice: &'a ChoiceModel,
}

impl Scorer for OracleScorer<'_> {
    fn name(&self) -> &str {
        "oracle"
    }

    fn score(&self, u: UserId, c: CollectionId, ctx: &Context, _: &FeatureVector) -> Result<f64, EvalError> {
        Ok(self.choice.utility(u, c, ctx.meal_shift))
    }
}

/// Orders in the collection during the context's meal shift over the
/// statistics window, ignoring the user.
pub struct PopularityScorer<'a> {
    pub extractor: &'a FeatureExtractor,
}

impl Scorer for PopularityScorer<'_> {
    fn name(&self) -> &str {
        "popularity"
    }

    fn score(&self, _: UserId, c: CollectionId, ctx: &Context, _: &FeatureVector) -> Result<f64, EvalError> {
        Ok(self.extractor.stats(c).orders_per_shift[ctx.meal_shift.index()] as f64)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn name(&self) -> &str {
        "constant"
    }

    fn score(&self, _: UserId, _: CollectionId, _: &Context, _: &FeatureVector) -> Result<f64, EvalError> {
        Ok(self.0)
    }
}

/// Reverses another scorer's order.
pub struct Negated<S>(pub S);

impl<S: Scorer> Scorer for Negated<S> {
    fn name(&self) -> &str {
        "negated"
    }

    fn score(&self, u: UserId, c: CollectionId, ctx: &Context, f: &FeatureVector) -> Result<f64, EvalError> {
        Ok(-self.0.score(u, c, ctx, f)?)
    }
}
