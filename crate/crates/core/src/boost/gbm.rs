use serde::{Deserialize, Serialize};

use super::tree::{grow, Binned, DecreaseRule, LeafRule, Tree};
use super::BoostParams;
use crate::{Error, Result};

fn sigmoid(f: f64) -> f64 {
    1.0 / (1.0 + (-f).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    /// Log-odds of the training base rate.
    pub init: f64,
    pub lambda: f64,
    pub trees: Vec<Tree>,
    /// Per-feature share of the total Gini decrease; sums to 1 unless no split was made.
    pub importance: Vec<f64>,
    /// Training deviance after each boosting round (index 0 is before any tree).
    pub train_deviance: Vec<f64>,
}

impl GbmModel {
    /// Log-odds prediction using the first `rounds` trees.
    pub fn decision_staged(&self, x: &[f64], rounds: usize) -> f64 {
        self.init + self.lambda * self.trees.iter().take(rounds).map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.decision_staged(x, self.trees.len())
    }

    pub fn predict_prob(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

pub(crate) fn check_inputs(x: &[Vec<f64>], y: &[bool]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::param(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let p = x.first().map_or(0, Vec::len);
    if p == 0 {
        return Err(Error::param("at least one feature is required"));
    }
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::param("rows have inconsistent lengths"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite feature value".into()));
    }
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Degenerate("boosting needs both classes present".into()));
    }
    Ok(p)
}

fn deviance(f: &[f64], y: &[bool]) -> f64 {
    // -2 log-likelihood, written with softplus for stability
    let sp = |t: f64| if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
    2.0 * f.iter().zip(y).map(|(&fi, &yi)| if yi { sp(-fi) } else { sp(fi) }).sum::<f64>()
}

/// Stagewise logistic-loss boosting: start at the base-rate log-odds, then for each
/// round fit a tree with at most `max_splits` splits to the residuals `y - p`, set
/// leaf values by one Newton step and add them scaled by `lambda`.
///
/// `eval` rows are scored after each round listed in `checkpoints`, which is how
/// cross-validation scores several tree counts from a single fit.
pub(crate) fn fit_staged(
    x: &[Vec<f64>],
    y: &[bool],
    params: &BoostParams,
    eval: &[Vec<f64>],
    checkpoints: &[usize],
    track_deviance: bool,
) -> Result<(GbmModel, Vec<Vec<f64>>)> {
    let p = check_inputs(x, y)?;
    params.validate()?;
    let n = x.len();
    let binned = Binned::new(x, params.max_bins)?;
    let rate = y.iter().filter(|&&v| v).count() as f64 / n as f64;
    let init = (rate / (1.0 - rate)).ln();
    let mut f = vec![init; n];
    let mut r = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut eval_f = vec![init; eval.len()];
    let mut staged = Vec::with_capacity(checkpoints.len());
    let mut importance = vec![0.0; p];
    let mut trees = Vec::with_capacity(params.trees);
    let mut dev = Vec::new();
    if track_deviance {
        dev.push(deviance(&f, y));
    }
    let mut next_cp = 0;
    while next_cp < checkpoints.len() && checkpoints[next_cp] == 0 {
        staged.push(eval_f.clone());
        next_cp += 1;
    }
    for round in 1..=params.trees {
        for i in 0..n {
            let pi = sigmoid(f[i]);
            r[i] = f64::from(u8::from(y[i])) - pi;
            h[i] = pi * (1.0 - pi);
        }
        let out =
            grow(&binned, &r, Some(&h), params.max_splits, params.min_leaf, LeafRule::Newton, DecreaseRule::Gini(y));
        for (fi, v) in f.iter_mut().zip(&out.fitted) {
            *fi += params.lambda * v;
        }
        for (feat, _, dec) in out.tree.splits() {
            importance[feat] += dec;
        }
        if !eval.is_empty() {
            for (ef, row) in eval_f.iter_mut().zip(eval) {
                *ef += params.lambda * out.tree.predict(row);
            }
        }
        if track_deviance {
            dev.push(deviance(&f, y));
        }
        trees.push(out.tree);
        while next_cp < checkpoints.len() && checkpoints[next_cp] == round {
            staged.push(eval_f.clone());
            next_cp += 1;
        }
    }
    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        importance.iter_mut().for_each(|v| *v /= total);
    }
    let model = GbmModel { init, lambda: params.lambda, trees, importance, train_deviance: dev };
    Ok((model, staged))
}

/// Fits a boosted classifier; see [`BoostParams`] for the tuning parameters.
pub fn fit_gbm(x: &[Vec<f64>], y: &[bool], params: &BoostParams) -> Result<GbmModel> {
    fit_staged(x, y, params, &[], &[], true).map(|(m, _)| m)
}
