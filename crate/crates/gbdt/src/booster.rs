use crate::binning::BinMapper;
use crate::grower::Grower;
use crate::loss::{log_loss, logistic_grad_hess, sigmoid};
use crate::params::{GbdtParams, Monotone, SchemaInfo};
use crate::tree::Tree;
use crate::{GbdtError, Matrix};

/// A trained ensemble.
///
/// `predict = sigmoid(base_score + learning_rate * sum(tree(x)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub schema: SchemaInfo,
    /// Prior log-odds.
    pub base_score: f64,
    pub params: GbdtParams,
    pub trees: Vec<Tree>,
}

/// Per-round training diagnostics.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    /// Mean training log-loss before any tree, then after each round.
    pub loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub name: String,
    pub split_count: usize,
    pub total_gain: f64,
}

pub fn train(
    x: &Matrix,
    labels: &[f64],
    schema: &SchemaInfo,
    params: &GbdtParams,
) -> Result<GbdtModel, GbdtError> {
    train_with_log(x, labels, schema, params).map(|(m, _)| m)
}

pub fn train_with_log(
    x: &Matrix,
    labels: &[f64],
    schema: &SchemaInfo,
    params: &GbdtParams,
) -> Result<(GbdtModel, TrainLog), GbdtError> {
    params.validate()?;
    if x.n_cols() != schema.len() {
        return Err(GbdtError::FeatureCount {
            expected: schema.len(),
            actual: x.n_cols(),
        });
    }
    if params.monotone != schema.monotone {
        return Err(GbdtError::InvalidParams(
            "monotone flags in params disagree with the schema".into(),
        ));
    }
    if x.n_rows() == 0 || x.n_rows() != labels.len() {
        return Err(GbdtError::Training(format!(
            "need a non-empty dataset with one label per row ({} rows, {} labels)",
            x.n_rows(),
            labels.len()
        )));
    }
    if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(GbdtError::Training("labels must be 0 or 1".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(GbdtError::Training("both classes must be present".into()));
    }

    let mean = n_pos as f64 / labels.len() as f64;
    let base_score = (mean / (1.0 - mean)).ln();
    let mapper = BinMapper::fit(x, params.n_bins);
    let bins = mapper.bin_matrix(x);
    let grower = Grower {
        mapper: &mapper,
        bins: &bins,
        params,
    };

    let n = x.n_rows();
    let mut raw = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mean_loss = |raw: &[f64]| {
        raw.iter()
            .zip(labels)
            .map(|(&f, &y)| log_loss(f, y))
            .sum::<f64>()
            / n as f64
    };
    let mut log = TrainLog {
        loss: vec![mean_loss(&raw)],
    };
    let mut trees = Vec::with_capacity(params.n_trees);

    for _ in 0..params.n_trees {
        for i in 0..n {
            let (g, h) = logistic_grad_hess(raw[i], labels[i]);
            grad[i] = g;
            hess[i] = h;
        }
        let (tree, row_values) = grower.grow(&grad, &hess);
        for (f, v) in raw.iter_mut().zip(&row_values) {
            *f += params.learning_rate * v;
        }
        log.loss.push(mean_loss(&raw));
        trees.push(tree);
    }

    Ok((
        GbdtModel {
            schema: schema.clone(),
            base_score,
            params: params.clone(),
            trees,
        },
        log,
    ))
}

impl GbdtModel {
    /// A tree-less model that predicts `mean` everywhere.
    pub fn from_prior(schema: SchemaInfo, mean: f64) -> Self {
        let params = GbdtParams {
            monotone: schema.monotone.clone(),
            ..Default::default()
        };
        GbdtModel {
            schema,
            base_score: (mean / (1.0 - mean)).ln(),
            params,
            trees: Vec::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn fingerprint(&self) -> u64 {
        self.schema.fingerprint
    }

    /// Raw log-odds; no schema check.
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        self.base_score + self.params.learning_rate * sum
    }

    /// Probability of the positive class for a row laid out under the schema
    /// identified by `fingerprint`.
    pub fn predict(&self, fingerprint: u64, x: &[f64]) -> Result<f64, GbdtError> {
        if fingerprint != self.schema.fingerprint {
            return Err(GbdtError::SchemaMismatch {
                expected: self.schema.fingerprint,
                actual: fingerprint,
            });
        }
        if x.len() != self.n_features() {
            return Err(GbdtError::FeatureCount {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        Ok(sigmoid(self.raw_score(x)))
    }

    /// [`predict`](Self::predict) for every row of `x`. Walks the trees in
    /// the outer loop, which keeps each tree in cache across rows.
    pub fn predict_batch(&self, fingerprint: u64, x: &Matrix) -> Result<Vec<f64>, GbdtError> {
        if fingerprint != self.schema.fingerprint {
            return Err(GbdtError::SchemaMismatch {
                expected: self.schema.fingerprint,
                actual: fingerprint,
            });
        }
        if x.n_rows() > 0 && x.n_cols() != self.n_features() {
            return Err(GbdtError::FeatureCount {
                expected: self.n_features(),
                actual: x.n_cols(),
            });
        }
        let mut sums = vec![0.0; x.n_rows()];
        for t in &self.trees {
            for (s, row) in sums.iter_mut().zip(x.rows()) {
                *s += t.predict(row);
            }
        }
        Ok(sums
            .into_iter()
            .map(|s| sigmoid(self.base_score + self.params.learning_rate * s))
            .collect())
    }

    pub fn monotone(&self, feature: usize) -> Monotone {
        self.schema.monotone[feature]
    }

    /// Split counts and summed gains per feature, in schema order.
    pub fn feature_importance(&self) -> Vec<FeatureImportance> {
        let mut out: Vec<FeatureImportance> = self
            .schema
            .feature_names
            .iter()
            .map(|name| FeatureImportance {
                name: name.clone(),
                split_count: 0,
                total_gain: 0.0,
            })
            .collect();
        for tree in &self.trees {
            for (f, gain) in tree.splits() {
                let entry = &mut out[f as usize];
                entry.split_count += 1;
                entry.total_gain += gain;
            }
        }
        out
    }
}
