//! Gradient-boosted decision trees for binary classification.
//!
//! Trees are grown leaf-wise over quantile-binned histograms with a logistic
//! loss. Each feature can carry a monotone constraint, enforced during growth
//! by rejecting splits that order the children the wrong way and by passing
//! output bounds down to descendants. Missing values (`NaN`) are routed by a
//! learned default direction per split.
//!
//! ```
//! use collrec_gbdt::{train, GbdtParams, Matrix, Monotone, SchemaInfo};
//!
//! let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 100.0 - 1.0]).collect();
//! let labels: Vec<f64> = rows.iter().map(|r| (r[0] > 0.0) as u8 as f64).collect();
//! let schema = SchemaInfo::new(vec!["x".into()], vec![Monotone::Increasing]);
//! let params = GbdtParams { n_trees: 20, min_samples_leaf: 1, ..GbdtParams::for_schema(&schema) };
//! let model = train(&Matrix::from_rows(&rows), &labels, &schema, &params).unwrap();
//! assert!(model.predict(schema.fingerprint, &[0.5]).unwrap() > 0.5);
//! ```

// `!(x > y)` is how NaN gets rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod binning;
mod booster;
mod error;
mod grower;
mod io;
mod loss;
mod params;
mod tree;

pub use binning::BinMapper;
pub use booster::{train, train_with_log, FeatureImportance, GbdtModel, TrainLog};
pub use error::GbdtError;
pub use grower::MIN_SPLIT_GAIN;
pub use loss::{log_loss, logistic_grad_hess, sigmoid};
pub use params::{GbdtParams, Monotone, SchemaInfo};
pub use tree::{Node, Tree};

/// Dense row-major feature matrix; `NaN` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl Matrix {
    pub fn new(data: Vec<f64>, n_rows: usize, n_cols: usize) -> Self {
        assert_eq!(data.len(), n_rows * n_cols, "matrix shape mismatch");
        Matrix {
            data,
            n_rows,
            n_cols,
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            data,
            n_rows: rows.len(),
            n_cols,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_cols.max(1)).take(self.n_rows)
    }
}
