//! Boosted decision trees, Gini importance and bootstrap rank aggregation.
//!
//! Features are binned by rank before trees are grown, so any strictly increasing
//! transform of a feature leaves every split (and every importance rank) unchanged.

mod cv;
mod gbm;
mod rank;
mod tree;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use cv::{auc, stratified_folds, tune_cv, GridScore, TuneResult};
pub use gbm::{fit_gbm, GbmModel};
pub use rank::{
    assign_total_rank, bootstrap_rank, cascade_label, rank_features, read_rank_histogram, write_rank_histogram,
    ImportanceRanking,
};
pub use tree::{fit_tree, gini, Node, Tree};

/// Tuning parameters for one boosted fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    /// B, the number of trees.
    pub trees: usize,
    /// λ, the shrinkage applied to every tree.
    pub lambda: f64,
    /// d, the maximum number of splits per tree.
    pub max_splits: usize,
    pub min_leaf: usize,
    pub max_bins: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams { trees: 100, lambda: 0.1, max_splits: 1, min_leaf: 10, max_bins: 64 }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::param("B must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::param(format!("lambda must lie in (0, 1], got {}", self.lambda)));
        }
        if self.min_leaf == 0 {
            return Err(Error::param("min_leaf must be at least 1"));
        }
        Ok(())
    }
}

/// Candidate values for each tuning parameter; the grid is their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostGrid {
    pub trees: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub max_splits: Vec<usize>,
}

impl Default for BoostGrid {
    fn default() -> Self {
        BoostGrid { trees: vec![50, 150, 300], lambdas: vec![0.01, 0.1], max_splits: vec![1, 2, 3] }
    }
}

impl BoostGrid {
    pub fn single(trees: usize, lambda: f64, max_splits: usize) -> Self {
        BoostGrid { trees: vec![trees], lambdas: vec![lambda], max_splits: vec![max_splits] }
    }

    pub fn len(&self) -> usize {
        self.trees.len() * self.lambdas.len() * self.max_splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { folds: 8, repeats: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Area under the ROC curve (higher is better).
    #[default]
    Auc,
    /// Mean Bernoulli log-likelihood (higher is better).
    LogLikelihood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub grid: BoostGrid,
    pub cv: CvConfig,
    pub metric: Metric,
    pub min_leaf: usize,
    pub max_bins: usize,
    /// Re-run cross-validated tuning inside every bootstrap fit; when false the
    /// grid is tuned once on the full sample and reused.
    pub retune_each_fit: bool,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            grid: BoostGrid::default(),
            cv: CvConfig::default(),
            metric: Metric::Auc,
            min_leaf: 10,
            max_bins: 64,
            retune_each_fit: true,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.is_empty() {
            return Err(Error::param("boosting grid is empty"));
        }
        if self.cv.folds < 2 || self.cv.repeats == 0 {
            return Err(Error::param("cross-validation needs >= 2 folds and >= 1 repeat"));
        }
        for &lambda in &g.lambdas {
            self.params(1, lambda, 0).validate()?;
        }
        if g.trees.contains(&0) {
            return Err(Error::param("B must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn params(&self, trees: usize, lambda: f64, max_splits: usize) -> BoostParams {
        BoostParams { trees, lambda, max_splits, min_leaf: self.min_leaf, max_bins: self.max_bins }
    }
}
