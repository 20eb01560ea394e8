//! Statistical inference and variable-importance toolkit for laser tattoo-removal
//! treatment records.
//!
//! The crate is organised along the analysis pipeline:
//!
//! * [`distributions`]: reference distributions (normal, t, chi-square, F, studentized range)
//! * [`data`]: patient / tattoo / treatment records, CSV ingestion and a seeded synthetic generator
//! * [`featurize`]: first-arrival truncation, forward differencing, per-tattoo summaries
//! * [`hypothesis`]: proportion, location, resampling and one-way ANOVA tests
//! * [`logit`]: logistic regression by maximum likelihood with Wald inference
//! * [`boost`]: CART trees, logistic gradient boosting, CV tuning and bootstrap rank aggregation
//! * [`report`]: the batch pipeline emitting CSV / Markdown tables, SVG plots and a manifest

pub mod boost;
pub mod data;
pub mod distributions;
mod error;
pub mod featurize;
pub mod hypothesis;
pub mod logit;
pub mod report;
pub(crate) mod stats;

pub use error::{Error, Result};
