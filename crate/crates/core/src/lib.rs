//! Curated-collection recommendation: a synthetic marketplace, embedding
//! aggregation, feature extraction, dataset construction and evaluation.

// `!(x > y)` is how NaN gets rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod embedding;
pub mod eval;
pub mod features;
pub mod marketplace;
pub mod pipeline;
pub mod rng;
