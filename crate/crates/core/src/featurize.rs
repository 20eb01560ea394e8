//! Per-tattoo summary features from treatment series.
//!
//! Each series is optionally cut at its first recorded complication, then the
//! four laser settings are summarised by mean and sample SD of the raw values and
//! of their forward differences.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Issue, IssueKind, Setting, TreatmentSeries};
use crate::stats::{mean, pearson, percentile_sorted, sample_var};
use crate::{Error, Result};

/// Which portion of each series is summarised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    Full,
    /// Events up to and including the first complication.
    #[default]
    FirstArrival,
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(FeatureMode::Full),
            "first-arrival" | "first_arrival" => Ok(FeatureMode::FirstArrival),
            other => Err(Error::Input(format!("unknown feature mode `{other}` (expected full or first-arrival)"))),
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Full => "full",
            FeatureMode::FirstArrival => "first-arrival",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    MeanFluence,
    SdFluence,
    MeanSpot,
    SdSpot,
    MeanWavelength,
    MeanFrequency,
    MeanDiffFluence,
    MeanDiffSpot,
    MeanDiffWavelength,
    MeanDiffFrequency,
    SdDiffFrequency,
    MeanDaysBetween,
}

impl Feature {
    pub const ALL: [Feature; 12] = [
        Feature::MeanFluence,
        Feature::SdFluence,
        Feature::MeanSpot,
        Feature::SdSpot,
        Feature::MeanWavelength,
        Feature::MeanFrequency,
        Feature::MeanDiffFluence,
        Feature::MeanDiffSpot,
        Feature::MeanDiffWavelength,
        Feature::MeanDiffFrequency,
        Feature::SdDiffFrequency,
        Feature::MeanDaysBetween,
    ];

    /// Column name in `features.csv`.
    pub fn key(self) -> &'static str {
        match self {
            Feature::MeanFluence => "mean_fluence",
            Feature::SdFluence => "sd_fluence",
            Feature::MeanSpot => "mean_spot",
            Feature::SdSpot => "sd_spot",
            Feature::MeanWavelength => "mean_wavelength",
            Feature::MeanFrequency => "mean_frequency",
            Feature::MeanDiffFluence => "mean_diff_fluence",
            Feature::MeanDiffSpot => "mean_diff_spot",
            Feature::MeanDiffWavelength => "mean_diff_wavelength",
            Feature::MeanDiffFrequency => "mean_diff_frequency",
            Feature::SdDiffFrequency => "sd_diff_frequency",
            Feature::MeanDaysBetween => "mean_days_between",
        }
    }

    /// Human-readable name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Feature::MeanFluence => "Mean Fluence",
            Feature::SdFluence => "SD Fluence",
            Feature::MeanSpot => "Mean Spot Size",
            Feature::SdSpot => "SD Spot Size",
            Feature::MeanWavelength => "Mean Wavelength",
            Feature::MeanFrequency => "Mean Frequency",
            Feature::MeanDiffFluence => "Mean Differenced Fluence",
            Feature::MeanDiffSpot => "Mean Differenced Spot Size",
            Feature::MeanDiffWavelength => "Mean Differenced Wavelength",
            Feature::MeanDiffFrequency => "Mean Differenced Frequency",
            Feature::SdDiffFrequency => "SD Differenced Frequency",
            Feature::MeanDaysBetween => "Mean Days Between Appts.",
        }
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL.into_iter().find(|f| f.key() == s).ok_or_else(|| Error::Input(format!("unknown feature `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub tattoo_id: String,
    pub mean_fluence: f64,
    pub sd_fluence: Option<f64>,
    pub mean_spot: f64,
    pub sd_spot: Option<f64>,
    pub mean_wavelength: f64,
    pub mean_frequency: f64,
    pub mean_diff_fluence: Option<f64>,
    pub mean_diff_spot: Option<f64>,
    pub mean_diff_wavelength: Option<f64>,
    pub mean_diff_frequency: Option<f64>,
    pub sd_diff_frequency: Option<f64>,
    pub mean_days_between: Option<f64>,
    /// Complication recorded anywhere in the summarised series.
    pub label: bool,
}

impl FeatureRow {
    pub fn get(&self, f: Feature) -> Option<f64> {
        match f {
            Feature::MeanFluence => Some(self.mean_fluence),
            Feature::SdFluence => self.sd_fluence,
            Feature::MeanSpot => Some(self.mean_spot),
            Feature::SdSpot => self.sd_spot,
            Feature::MeanWavelength => Some(self.mean_wavelength),
            Feature::MeanFrequency => Some(self.mean_frequency),
            Feature::MeanDiffFluence => self.mean_diff_fluence,
            Feature::MeanDiffSpot => self.mean_diff_spot,
            Feature::MeanDiffWavelength => self.mean_diff_wavelength,
            Feature::MeanDiffFrequency => self.mean_diff_frequency,
            Feature::SdDiffFrequency => self.sd_diff_frequency,
            Feature::MeanDaysBetween => self.mean_days_between,
        }
    }

    /// Values of `features` in order, or `None` if any is missing.
    pub fn complete(&self, features: &[Feature]) -> Option<Vec<f64>> {
        features.iter().map(|&f| self.get(f)).collect()
    }
}

/// Cuts the series after its first complication (inclusive). Series without a
/// complication are returned unchanged.
pub fn truncate_first_arrival(series: &TreatmentSeries) -> TreatmentSeries {
    match series.events().iter().position(|e| e.complication_observed) {
        Some(i) => series.prefix(i + 1),
        None => series.clone(),
    }
}

/// `out[k] = values[k + 1] - values[k]`.
pub fn forward_difference(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "forward difference needs at least 2 values, got {}",
            values.len()
        )));
    }
    Ok(values.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Mean of the forward differences, which telescopes to (last - first) / (n - 1).
pub fn mean_difference(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientData("mean difference needs at least 2 values".into()));
    }
    Ok((values[values.len() - 1] - values[0]) / (values.len() - 1) as f64)
}

fn sd(xs: &[f64]) -> Option<f64> {
    (xs.len() >= 2).then(|| sample_var(xs).max(0.0).sqrt())
}

pub fn summarize(series: &TreatmentSeries) -> FeatureRow {
    let n = series.len();
    let fluence = series.values(Setting::Fluence);
    let spot = series.values(Setting::SpotSize);
    let wavelength = series.values(Setting::Wavelength);
    let frequency = series.values(Setting::Frequency);
    let mean_diff = |v: &[f64]| mean_difference(v).ok();
    let diff_freq = forward_difference(&frequency).ok();
    let days = series.days();
    FeatureRow {
        tattoo_id: series.tattoo_id().to_string(),
        mean_fluence: mean(&fluence),
        sd_fluence: sd(&fluence),
        mean_spot: mean(&spot),
        sd_spot: sd(&spot),
        mean_wavelength: mean(&wavelength),
        mean_frequency: mean(&frequency),
        mean_diff_fluence: mean_diff(&fluence),
        mean_diff_spot: mean_diff(&spot),
        mean_diff_wavelength: mean_diff(&wavelength),
        mean_diff_frequency: mean_diff(&frequency),
        sd_diff_frequency: diff_freq.as_deref().and_then(sd),
        mean_days_between: (n >= 2).then(|| days[n - 1] as f64 / (n - 1) as f64),
        label: series.has_complication(),
    }
}

pub fn featurize_series(series: &TreatmentSeries, mode: FeatureMode) -> FeatureRow {
    match mode {
        FeatureMode::Full => summarize(series),
        FeatureMode::FirstArrival => summarize(&truncate_first_arrival(series)),
    }
}

/// One row per series, in dataset order.
pub fn featurize_dataset(ds: &Dataset, mode: FeatureMode) -> Vec<FeatureRow> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ds.series.par_iter().map(|s| featurize_series(s, mode)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ds.series.iter().map(|s| featurize_series(s, mode)).collect()
    }
}

/// Writes `features.csv`: tattoo_id, the twelve features, label. Missing = empty cell.
pub fn write_features<W: std::io::Write>(rows: &[FeatureRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["tattoo_id"];
    header.extend(Feature::ALL.iter().map(|f| f.key()));
    header.push("label");
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.tattoo_id.clone()];
        rec.extend(Feature::ALL.iter().map(|&f| r.get(f).map(|v| v.to_string()).unwrap_or_default()));
        rec.push(if r.label { "1" } else { "0" }.to_string());
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("features.csv", e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileBinning {
    /// Empirical 25th, 50th and 75th percentiles.
    pub cut_points: [f64; 3],
    /// Largest value in each bin (the last is the sample maximum).
    pub upper_bounds: [f64; 4],
    pub bin_counts: [usize; 4],
    pub bin_positives: [usize; 4],
    pub bin_rates: [f64; 4],
}

/// Bins at the quartiles: (-inf, q25], (q25, q50], (q50, q75], (q75, inf).
/// Values tied with a cut point fall in the lower bin.
pub fn quartile_bin(values: &[f64], labels: &[bool]) -> Result<QuartileBinning> {
    if values.len() != labels.len() {
        return Err(Error::Input(format!("{} values but {} labels", values.len(), labels.len())));
    }
    if values.len() < 4 {
        return Err(Error::InsufficientData(format!("quartile binning needs >= 4 values, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("quartile binning values must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cut_points = [0.25, 0.5, 0.75].map(|p| percentile_sorted(&sorted, p));
    let mut counts = [0usize; 4];
    let mut pos = [0usize; 4];
    let mut upper = [f64::NEG_INFINITY; 4];
    for (&v, &l) in values.iter().zip(labels) {
        let b = bin_index(v, &cut_points);
        counts[b] += 1;
        pos[b] += usize::from(l);
        upper[b] = upper[b].max(v);
    }
    let rates = std::array::from_fn(|i| if counts[i] > 0 { pos[i] as f64 / counts[i] as f64 } else { 0.0 });
    Ok(QuartileBinning { cut_points, upper_bounds: upper, bin_counts: counts, bin_positives: pos, bin_rates: rates })
}

pub(crate) fn bin_index(v: f64, cuts: &[f64; 3]) -> usize {
    cuts.iter().take_while(|&&c| v > c).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneOutcome {
    pub retained: Vec<Feature>,
    /// Removed features in removal order, with their mean |r| at removal time.
    pub removed: Vec<(Feature, f64)>,
    pub issues: Vec<Issue>,
}

/// Greedy pruning on a symmetric correlation matrix: while some retained pair has
/// |r| above `threshold`, drop the member of such a pair whose mean |r| against
/// the other retained variables is largest (ties: the later index).
///
/// Returns the retained indices and the removed `(index, mean |r|)` pairs.
pub fn prune_correlation_matrix(corr: &[Vec<f64>], threshold: f64) -> (Vec<usize>, Vec<(usize, f64)>) {
    let n = corr.len();
    let mut alive = vec![true; n];
    let mut removed = Vec::new();
    loop {
        let live: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
        let mut flagged = vec![false; n];
        for (a, &i) in live.iter().enumerate() {
            for &j in &live[a + 1..] {
                if corr[i][j].abs() > threshold {
                    flagged[i] = true;
                    flagged[j] = true;
                }
            }
        }
        let mean_abs = |i: usize| {
            let others: Vec<f64> = live.iter().filter(|&&j| j != i).map(|&j| corr[i][j].abs()).collect();
            if others.is_empty() {
                0.0
            } else {
                mean(&others)
            }
        };
        let worst = live.iter().copied().filter(|&i| flagged[i]).map(|i| (i, mean_abs(i))).fold(
            None,
            |best: Option<(usize, f64)>, (i, m)| match best {
                Some((_, bm)) if bm > m => best,
                _ => Some((i, m)),
            },
        );
        match worst {
            Some((i, m)) => {
                alive[i] = false;
                removed.push((i, m));
            }
            None => break,
        }
    }
    ((0..n).filter(|&i| alive[i]).collect(), removed)
}

/// Removes features until no retained pair exceeds `threshold` in absolute
/// Pearson correlation, computed over rows complete on all candidate features.
/// Zero-variance features are dropped first with a `degenerate_feature` issue.
pub fn prune_correlated(rows: &[FeatureRow], features: &[Feature], threshold: f64) -> Result<PruneOutcome> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::param(format!("correlation threshold must lie in (0, 1), got {threshold}")));
    }
    let complete: Vec<Vec<f64>> = rows.iter().filter_map(|r| r.complete(features)).collect();
    if complete.len() < 2 {
        return Err(Error::InsufficientData(format!("need >= 2 complete rows, got {}", complete.len())));
    }
    let columns: Vec<Vec<f64>> = (0..features.len()).map(|j| complete.iter().map(|r| r[j]).collect()).collect();

    let mut issues = Vec::new();
    let mut candidates = Vec::new();
    for (j, &f) in features.iter().enumerate() {
        if sample_var(&columns[j]) > 0.0 {
            candidates.push(j);
        } else {
            issues.push(Issue {
                kind: IssueKind::DegenerateFeature,
                file: "features".into(),
                row: None,
                message: format!("{} has zero variance; excluded", f.key()),
            });
        }
    }
    let corr: Vec<Vec<f64>> = candidates
        .iter()
        .map(|&a| candidates.iter().map(|&b| pearson(&columns[a], &columns[b]).unwrap_or(0.0)).collect())
        .collect();
    let (keep, dropped) = prune_correlation_matrix(&corr, threshold);
    Ok(PruneOutcome {
        retained: keep.into_iter().map(|i| features[candidates[i]]).collect(),
        removed: dropped.into_iter().map(|(i, m)| (features[candidates[i]], m)).collect(),
        issues,
    })
}
