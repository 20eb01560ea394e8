use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cv::tune_cv;
use super::gbm::{check_inputs, fit_gbm};
use super::{BoostConfig, BoostParams};
use crate::{Error, Result};

const MAX_RESAMPLE_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub features: Vec<String>,
    pub sims: usize,
    /// `histogram[f][r]` counts the fits that gave feature `f` rank `r + 1`.
    pub histogram: Vec<Vec<u32>>,
    pub rank_mode: Vec<usize>,
    pub mode_frequency: Vec<u32>,
    /// Final rank of each feature; a permutation of `1..=n_features`.
    pub total_rank: Vec<usize>,
    /// Tuning point used by each bootstrap fit.
    pub chosen: Vec<BoostParams>,
}

impl ImportanceRanking {
    pub fn from_histogram(features: Vec<String>, histogram: Vec<Vec<u32>>) -> Result<Self> {
        if features.len() != histogram.len() {
            return Err(Error::param("one histogram row per feature is required"));
        }
        let sims = histogram.first().map_or(0, |r| r.iter().sum::<u32>() as usize);
        let (rank_mode, mode_frequency, total_rank) = assign_total_rank(&histogram)?;
        Ok(ImportanceRanking { features, sims, histogram, rank_mode, mode_frequency, total_rank, chosen: Vec::new() })
    }

    /// Features in total-rank order.
    pub fn ordered(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by_key(|&i| self.total_rank[i]);
        idx
    }
}

/// Ordinal ranks by descending importance (1 = most important); equal importances
/// are ordered by feature index.
pub fn rank_features(importance: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..importance.len()).collect();
    idx.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]));
    let mut ranks = vec![0; importance.len()];
    for (pos, &i) in idx.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    ranks
}

/// Turns a rank-frequency histogram into (rank modes, mode frequencies, total ranks).
///
/// The mode is the most frequent rank, ties going to the better rank. Features are
/// then ordered by mode, then by higher mode frequency, then by index, and the
/// total rank is the position in that order. A feature whose mode is already taken
/// is therefore displaced downward.
pub fn assign_total_rank(histogram: &[Vec<u32>]) -> Result<(Vec<usize>, Vec<u32>, Vec<usize>)> {
    let n = histogram.len();
    if n == 0 {
        return Err(Error::param("empty rank histogram"));
    }
    if histogram.iter().any(|r| r.len() != n) {
        return Err(Error::param(format!("each histogram row must have {n} rank bins")));
    }
    let mut modes = Vec::with_capacity(n);
    let mut freqs = Vec::with_capacity(n);
    for row in histogram {
        let (m, &f) = row.iter().enumerate().fold((0, &row[0]), |acc, (i, c)| if *c > *acc.1 { (i, c) } else { acc });
        modes.push(m + 1);
        freqs.push(f);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| modes[a].cmp(&modes[b]).then(freqs[b].cmp(&freqs[a])));
    let mut total = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        total[i] = pos + 1;
    }
    Ok((modes, freqs, total))
}

/// `"1 -> 2 -> 3"` for a feature whose mode 1 was displaced to total rank 3.
pub fn cascade_label(mode: usize, total: usize) -> String {
    if total > mode {
        (mode..=total).map(|r| r.to_string()).collect::<Vec<_>>().join(" -> ")
    } else if total < mode {
        format!("{mode} -> {total}")
    } else {
        mode.to_string()
    }
}

fn class_counts(y: &[bool], idx: &[usize]) -> (usize, usize) {
    let pos = idx.iter().filter(|&&i| y[i]).count();
    (pos, idx.len() - pos)
}

fn one_fit(
    x: &[Vec<f64>],
    y: &[bool],
    config: &BoostConfig,
    fixed: Option<BoostParams>,
    seed: u64,
    sim: usize,
) -> Result<(Vec<usize>, BoostParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + sim as u64);
    let n = x.len();
    let need = if fixed.is_some() { 1 } else { config.cv.folds };
    let mut attempt = 0;
    let idx = loop {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let (pos, neg) = class_counts(y, &idx);
        if pos >= need && neg >= need {
            break idx;
        }
        attempt += 1;
        if attempt == MAX_RESAMPLE_ATTEMPTS {
            return Err(Error::InsufficientData(format!(
                "bootstrap resamples rarely contain {need} rows of each class"
            )));
        }
    };
    let bx: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
    let by: Vec<bool> = idx.iter().map(|&i| y[i]).collect();
    let params = match fixed {
        Some(p) => p,
        None => tune_cv(&bx, &by, config, rng.random())?.best,
    };
    let model = fit_gbm(&bx, &by, &params)?;
    Ok((rank_features(&model.importance), params))
}

/// Bootstrap importance ranking: each of `sims` fits resamples the rows with
/// replacement, tunes (B, λ, d) by cross-validation, fits the boosted model and
/// ranks the features by Gini importance. Per-fit random streams are derived from
/// `seed` and the fit index, so results do not depend on scheduling.
pub fn bootstrap_rank(
    x: &[Vec<f64>],
    y: &[bool],
    features: &[String],
    config: &BoostConfig,
    sims: usize,
    seed: u64,
) -> Result<ImportanceRanking> {
    let p = check_inputs(x, y)?;
    config.validate()?;
    if sims == 0 {
        return Err(Error::param("sims must be at least 1"));
    }
    if features.len() != p {
        return Err(Error::param(format!("{} feature names for {p} columns", features.len())));
    }
    let fixed = if config.retune_each_fit { None } else { Some(tune_cv(x, y, config, seed)?.best) };

    let run = |s: usize| one_fit(x, y, config, fixed, seed, s);
    #[cfg(feature = "parallel")]
    let fits: Vec<Result<(Vec<usize>, BoostParams)>> = {
        use rayon::prelude::*;
        (0..sims).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let fits: Vec<Result<(Vec<usize>, BoostParams)>> = (0..sims).map(run).collect();

    let mut histogram = vec![vec![0u32; p]; p];
    let mut chosen = Vec::with_capacity(sims);
    for fit in fits {
        let (ranks, params) = fit?;
        for (f, r) in ranks.into_iter().enumerate() {
            histogram[f][r - 1] += 1;
        }
        chosen.push(params);
    }
    let mut out = ImportanceRanking::from_histogram(features.to_vec(), histogram)?;
    out.chosen = chosen;
    Ok(out)
}

/// CSV with one row per feature: name, total rank, then counts for ranks 1..n.
pub fn write_rank_histogram<W: std::io::Write>(ranking: &ImportanceRanking, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let n = ranking.features.len();
    let mut header = vec!["feature".to_string(), "total_rank".to_string()];
    header.extend((1..=n).map(|r| format!("rank_{r}")));
    out.write_record(&header)?;
    for i in ranking.ordered() {
        let mut rec = vec![ranking.features[i].clone(), ranking.total_rank[i].to_string()];
        rec.extend(ranking.histogram[i].iter().map(u32::to_string));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("rank_histogram.csv", e))
}

/// Reads a histogram written by [`write_rank_histogram`]; total ranks are
/// recomputed from the counts.
pub fn read_rank_histogram<R: std::io::Read>(r: R) -> Result<ImportanceRanking> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let n = header.len().saturating_sub(2);
    let bad = |detail: String| Error::Schema { file: "rank_histogram.csv".into(), detail };
    if n == 0 || &header[0] != "feature" || &header[1] != "total_rank" {
        return Err(bad("expected columns feature,total_rank,rank_1..".into()));
    }
    let mut features = Vec::new();
    let mut histogram = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        features.push(rec[0].to_string());
        let counts = (2..rec.len())
            .map(|j| rec[j].trim().parse::<u32>().map_err(|_| bad(format!("row {}: bad count `{}`", i + 1, &rec[j]))))
            .collect::<Result<Vec<u32>>>()?;
        histogram.push(counts);
    }
    if features.len() != n {
        return Err(bad(format!("{} rank columns but {} features", n, features.len())));
    }
    ImportanceRanking::from_histogram(features, histogram)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordinal_ranks_break_ties_by_index() {
        assert_eq!(rank_features(&[0.1, 0.5, 0.1, 0.3]), vec![3, 1, 4, 2]);
    }

    #[test]
    fn cascade_from_table_rows() {
        let mut h = vec![vec![0u32; 10]; 10];
        h[0][0] = 108;
        h[1][0] = 84;
        h[2][0] = 80;
        for (i, row) in h.iter_mut().enumerate().skip(3) {
            row[i] = 150;
        }
        let (modes, freqs, total) = assign_total_rank(&h).unwrap();
        assert_eq!(&modes[..3], &[1, 1, 1]);
        assert_eq!(&freqs[..3], &[108, 84, 80]);
        assert_eq!(&total[..3], &[1, 2, 3]);
        assert_eq!(cascade_label(1, 3), "1 -> 2 -> 3");
        assert_eq!(cascade_label(4, 4), "4");
    }

    #[test]
    fn mode_ties_go_to_better_rank() {
        let h = vec![vec![2, 2, 0], vec![0, 1, 3], vec![2, 1, 1]];
        let (modes, _, total) = assign_total_rank(&h).unwrap();
        assert_eq!(modes, vec![1, 3, 1]);
        assert_eq!(total, vec![1, 3, 2]);
    }

    #[test]
    fn histogram_csv_round_trip() {
        let h = vec![vec![1, 3, 0], vec![3, 1, 0], vec![0, 0, 4]];
        let r = ImportanceRanking::from_histogram(vec!["a".into(), "b".into(), "c".into()], h).unwrap();
        let mut buf = Vec::new();
        write_rank_histogram(&r, &mut buf).unwrap();
        assert!(buf.starts_with(b"feature,total_rank,rank_1,rank_2,rank_3\nb,1,3,1,0\n"));
        let back = read_rank_histogram(buf.as_slice()).unwrap();
        assert_eq!(back.total_rank, vec![1, 2, 3]);
        assert_eq!(back.features, vec!["b", "a", "c"]);
    }

    #[test]
    fn total_rank_is_permutation() {
        let h = vec![vec![5, 0, 0, 0], vec![5, 0, 0, 0], vec![5, 0, 0, 0], vec![5, 0, 0, 0]];
        let (_, _, mut t) = assign_total_rank(&h).unwrap();
        t.sort_unstable();
        assert_eq!(t, vec![1, 2, 3, 4]);
    }
}
