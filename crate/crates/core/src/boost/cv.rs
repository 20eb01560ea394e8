use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gbm::{check_inputs, fit_staged};
use super::{BoostConfig, BoostParams, Metric};
use crate::stats::midranks;
use crate::{Error, Result};

/// Area under the ROC curve via the Mann-Whitney statistic (ties count one half).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::param("scores and labels differ in length"));
    }
    let pos = labels.iter().filter(|&&v| v).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate("AUC needs both classes".into()));
    }
    let (ranks, _) = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let (pos, neg) = (pos as f64, neg as f64);
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

fn mean_log_likelihood(logits: &[f64], labels: &[bool]) -> f64 {
    let sp = |t: f64| if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
    -logits.iter().zip(labels).map(|(&f, &y)| if y { sp(-f) } else { sp(f) }).sum::<f64>() / logits.len() as f64
}

/// Assigns each row a fold in `0..folds`, dealing each class separately in shuffled
/// order so that every fold receives both classes.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64, stream: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::param("need at least 2 folds"));
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.len() < folds || neg.len() < folds {
        return Err(Error::InsufficientData(format!(
            "stratified {folds}-fold split needs >= {folds} rows of each class, have {} positive and {} negative",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out = vec![0; labels.len()];
    let mut k = 0;
    for mut class in [pos, neg] {
        class.shuffle(&mut rng);
        for i in class {
            out[i] = k % folds;
            k += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub params: BoostParams,
    /// Metric averaged over all folds and repeats.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: BoostParams,
    pub scores: Vec<GridScore>,
}

/// Repeated stratified k-fold tuning over the (B, λ, d) grid.
///
/// One model with the largest B is fitted per (λ, d) and fold, and scored after each
/// candidate B. The best mean score wins; exact ties prefer smaller B, then larger λ,
/// then smaller d.
pub fn tune_cv(x: &[Vec<f64>], y: &[bool], config: &BoostConfig, seed: u64) -> Result<TuneResult> {
    check_inputs(x, y)?;
    config.validate()?;
    let mut trees = config.grid.trees.clone();
    trees.sort_unstable();
    trees.dedup();
    let max_b = *trees.last().expect("validated grid");
    let fold_sets: Vec<Vec<usize>> =
        (0..config.cv.repeats).map(|r| stratified_folds(y, config.cv.folds, seed, r as u64)).collect::<Result<_>>()?;
    let runs = (config.cv.repeats * config.cv.folds) as f64;

    let mut scores = Vec::with_capacity(config.grid.len());
    for &lambda in &config.grid.lambdas {
        for &d in &config.grid.max_splits {
            let mut sums = vec![0.0; trees.len()];
            for folds in &fold_sets {
                for k in 0..config.cv.folds {
                    let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
                    for (i, &f) in folds.iter().enumerate() {
                        if f == k {
                            vx.push(x[i].clone());
                            vy.push(y[i]);
                        } else {
                            tx.push(x[i].clone());
                            ty.push(y[i]);
                        }
                    }
                    let params = config.params(max_b, lambda, d);
                    let (_, staged) = fit_staged(&tx, &ty, &params, &vx, &trees, false)?;
                    for (s, logits) in sums.iter_mut().zip(&staged) {
                        *s += match config.metric {
                            Metric::Auc => auc(logits, &vy)?,
                            Metric::LogLikelihood => mean_log_likelihood(logits, &vy),
                        };
                    }
                }
            }
            for (&b, s) in trees.iter().zip(sums) {
                scores.push(GridScore { params: config.params(b, lambda, d), score: s / runs });
            }
        }
    }

    let mut order: Vec<&GridScore> = scores.iter().collect();
    order.sort_by(|a, b| {
        a.params
            .trees
            .cmp(&b.params.trees)
            .then(b.params.lambda.total_cmp(&a.params.lambda))
            .then(a.params.max_splits.cmp(&b.params.max_splits))
    });
    let mut best = order[0];
    for cand in &order[1..] {
        if cand.score > best.score {
            best = cand;
        }
    }
    Ok(TuneResult { best: best.params, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::BoostGrid;
    use approx::assert_relative_eq;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[false, false, true, true]).unwrap(), 0.0);
        assert_eq!(auc(&[0.5; 4], &[false, true, false, true]).unwrap(), 0.5);
        // brute force over pairs
        let s = [0.3, 0.1, 0.7, 0.7, 0.2, 0.9, 0.4];
        let l = [true, false, true, false, false, true, false];
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..7 {
            for j in 0..7 {
                if l[i] && !l[j] {
                    den += 1.0;
                    num += if s[i] > s[j] {
                        1.0
                    } else if s[i] == s[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        assert_relative_eq!(auc(&s, &l).unwrap(), num / den, epsilon = 1e-15);
    }

    #[test]
    fn folds_are_stratified() {
        let y: Vec<bool> = (0..100).map(|i| i % 7 == 0).collect();
        let f = stratified_folds(&y, 8, 3, 0).unwrap();
        for k in 0..8 {
            let pos = (0..100).filter(|&i| f[i] == k && y[i]).count();
            let all = f.iter().filter(|&&v| v == k).count();
            assert!((1..=2).contains(&pos));
            assert!((12..=13).contains(&all));
        }
        assert!(stratified_folds(&y[..20], 8, 3, 0).is_err());
    }

    fn toy() -> (Vec<Vec<f64>>, Vec<bool>) {
        let x: Vec<Vec<f64>> = (0..160).map(|i| vec![((i * 37) % 160) as f64, ((i * 59) % 160) as f64]).collect();
        let y = x.iter().enumerate().map(|(i, r)| r[0] + ((i * 31) % 50) as f64 > 100.0).collect();
        (x, y)
    }

    #[test]
    fn single_point_grid() {
        let (x, y) = toy();
        let cfg = BoostConfig { grid: BoostGrid::single(20, 0.1, 2), ..Default::default() };
        let r = tune_cv(&x, &y, &cfg, 1).unwrap();
        assert_eq!((r.best.trees, r.best.lambda, r.best.max_splits), (20, 0.1, 2));
        assert!(r.scores[0].score > 0.7);
    }

    #[test]
    fn identical_points_tie_break() {
        let (x, y) = toy();
        // d = 1 and d = 1 again: identical scores, so the first in tie order stays
        let cfg = BoostConfig {
            grid: BoostGrid { trees: vec![10, 10], lambdas: vec![0.1, 0.1], max_splits: vec![1, 1] },
            ..Default::default()
        };
        let r = tune_cv(&x, &y, &cfg, 5).unwrap();
        assert_eq!(r.best.trees, 10);
        // with a constant predictor every point scores 0.5 and the tie order decides
        let cfg = BoostConfig {
            grid: BoostGrid { trees: vec![30, 10], lambdas: vec![0.01, 0.1], max_splits: vec![2, 0] },
            ..Default::default()
        };
        let r = tune_cv(&x, &y, &cfg, 5).unwrap();
        let top = r.scores.iter().map(|s| s.score).fold(f64::MIN, f64::max);
        let winners: Vec<_> = r.scores.iter().filter(|s| s.score == top).map(|s| s.params).collect();
        let expect = winners
            .iter()
            .min_by(|a, b| {
                a.trees.cmp(&b.trees).then(b.lambda.total_cmp(&a.lambda)).then(a.max_splits.cmp(&b.max_splits))
            })
            .unwrap();
        assert_eq!(&r.best, expect);
    }
}
