//! Kernels for predicting cross-lingual transfer from sentence-embedding
//! similarity.
//!
//! The crate is `no_std` (it needs `alloc`). It covers:
//!
//! - [`embedding`]: validated, row-normalized embedding matrices;
//! - [`metrics`]: cosine mean, cosine gap, P@1 in both directions, mean CSLS
//!   and linear CKA with the unbiased HSIC estimator;
//! - [`rank_stats`]: Spearman correlation with average-rank ties,
//!   t-approximation and permutation p-values, critical values;
//! - [`analysis`]: joins of metric and transfer records, stratified
//!   correlations, Simpson's-paradox detection and the aggregate views;
//! - [`selection`]: per-target source ranking and top-K oracle accuracy.
//!
//! File formats, CSV tables and the command-line front end live in the
//! companion `xling` crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod embedding;
mod error;
pub mod metrics;
pub mod rank_stats;
pub mod records;
pub mod selection;
mod special;

pub use embedding::{EmbeddingMatrix, NORM_TOLERANCE};
pub use error::{Error, Result};
pub use records::{
    CoverageTable, LanguageId, Metric, MetricRecord, PairKey, Task, TransferRecord, UrielDistance,
    UrielKind,
};
