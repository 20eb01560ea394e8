//! The batch pipeline: load or synthesize data, featurize, run the test battery,
//! fit the logistic and boosted models, and write tables, plots and a manifest.
//!
//! Nothing reaches the output directory until every requested stage has
//! succeeded; files are assembled in memory, written to a hidden staging
//! directory and only then moved into place.

mod format;
mod svg;
mod tables;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boost::{bootstrap_rank, write_rank_histogram, BoostConfig, ImportanceRanking};
use crate::data::{ingest, synthesize_documented, Dataset, RowCounts, Setting, SynthConfig, SynthSummary};
use crate::featurize::{featurize_dataset, prune_correlated, write_features, Feature, FeatureMode, FeatureRow};
use crate::hypothesis::{DEFAULT_ALPHA, MAX_PERMUTATIONS};
use crate::logit::{fit_logit_rows, LogitFit, LogitOptions};
use crate::{Error, Result};

pub use format::{format_num, format_p, format_p_star, Table};
pub use svg::{plot_rank_histograms, plot_series};
pub use tables::{
    kruskal_table, location_tables, model_table, nonparametric_table, proportion_table, quartile_table, ttest_table,
    ANOVA_HEADER, T10_HEADER, T4_HEADER, T5_HEADER, T6_FEATURES, T6_HEADER, T7_FEATURES, T7_HEADER, T8_FEATURES,
    T8_HEADER, TUKEY_HEADER,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputPaths {
    pub patients: PathBuf,
    pub tattoos: PathBuf,
    pub treatments: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlotConfig {
    /// Number of treatment-series charts, taken from the longest series.
    pub series: usize,
    pub setting: Setting,
    pub rank_histograms: bool,
}

impl Default for PlotConfig {
    fn default() -> Self {
        PlotConfig { series: 3, setting: Setting::Fluence, rank_histograms: true }
    }
}

/// Everything a report run depends on. Read from one JSON document; any field
/// left out takes its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<InputPaths>,
    pub synth: Option<SynthConfig>,
    pub mode: FeatureMode,
    pub alpha: f64,
    pub n_perm: u64,
    pub sims: usize,
    pub boost: BoostConfig,
    pub prune_threshold: f64,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub plots: PlotConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            synth: None,
            mode: FeatureMode::FirstArrival,
            alpha: DEFAULT_ALPHA,
            n_perm: 100_000,
            sims: 300,
            boost: BoostConfig::default(),
            prune_threshold: 0.6,
            out: PathBuf::from("report"),
            seed: None,
            plots: PlotConfig::default(),
        }
    }
}

/// The bundled demonstration config as JSON.
pub const DEMO_CONFIG_JSON: &str = include_str!("demo.json");

impl RunConfig {
    /// Synthetic data at the default scale with a shortened bootstrap and
    /// permutation budget.
    pub fn demo() -> Self {
        serde_json::from_str(DEMO_CONFIG_JSON).expect("bundled demo config parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.input, &self.synth) {
            (Some(_), Some(_)) => return Err(Error::param("give either input paths or a synth config, not both")),
            (None, None) => return Err(Error::param("either input paths or a synth config is required")),
            _ => {}
        }
        if self.seed.is_none() {
            return Err(Error::param("a seed is required (randomization and bootstrap stages are stochastic)"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n_perm == 0 || self.n_perm > MAX_PERMUTATIONS {
            return Err(Error::param(format!("n_perm must lie in 1..={MAX_PERMUTATIONS}, got {}", self.n_perm)));
        }
        if self.sims == 0 {
            return Err(Error::param("sims must be at least 1"));
        }
        if !(self.prune_threshold > 0.0 && self.prune_threshold < 1.0) {
            return Err(Error::param(format!("prune_threshold must lie in (0, 1), got {}", self.prune_threshold)));
        }
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        self.boost.validate()
    }

    /// SHA-256 of the canonical JSON of this config with `out` cleared, so that
    /// the same analysis written to two places hashes identically.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        hex(&Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Seed for a named stage: the first eight bytes of SHA-256(seed || label).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| Error::Stage { stage: name, source: Box::new(e) })
}

/// Output files held in memory until [`Bundle::commit`].
#[derive(Debug, Default, Clone)]
pub struct Bundle {
    files: BTreeMap<String, Vec<u8>>,
}

impl Bundle {
    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.insert(name.into(), bytes.into());
    }

    /// Adds `<name>.csv` and `<name>.md`.
    pub fn add_table(&mut self, t: &Table) -> Result<()> {
        self.add(format!("{}.csv", t.name), t.to_csv_string()?);
        self.add(format!("{}.md", t.name), t.to_markdown());
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    fn digests(&self) -> BTreeMap<String, String> {
        self.files.iter().map(|(k, v)| (k.clone(), hex(&Sha256::digest(v)))).collect()
    }

    /// Writes every file under `dir` (created if missing). Files are first
    /// written to a sibling staging directory, which is removed on failure.
    pub fn commit(&self, dir: &Path) -> Result<()> {
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
        let staging = dir.with_file_name(format!(".{name}.partial"));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        let result = self.write_into(&staging).and_then(|()| Self::publish(&staging, dir, self.files.keys()));
        if staging.exists() {
            let _ = fs::remove_dir_all(&staging);
        }
        result
    }

    fn write_into(&self, root: &Path) -> Result<()> {
        for (name, bytes) in &self.files {
            let path = root.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    fn publish<'a>(staging: &Path, dir: &Path, names: impl Iterator<Item = &'a String>) -> Result<()> {
        if !dir.exists() {
            if let Some(parent) = dir.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            if fs::rename(staging, dir).is_ok() {
                return Ok(());
            }
        }
        for name in names {
            let (from, to) = (staging.join(name), dir.join(name));
            if let Some(parent) = to.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::rename(&from, &to).or_else(|_| fs::copy(&from, &to).map(|_| ())).map_err(|e| Error::io(&to, e))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedFeature {
    pub feature: String,
    pub mean_abs_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitSummary {
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub warning: Option<String>,
}

/// Written as `manifest.json`. Holds no timestamps or paths, so identical
/// configs give identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub stage_seeds: BTreeMap<String, u64>,
    pub feature_mode: FeatureMode,
    pub alpha: f64,
    pub n_perm: u64,
    pub sims: usize,
    pub row_counts: RowCounts,
    pub feature_rows: usize,
    pub model_rows: Option<usize>,
    pub synth: Option<SynthSummary>,
    pub retained_features: Vec<String>,
    pub removed_features: Vec<RemovedFeature>,
    pub logit: Option<LogitSummary>,
    /// How often each (B, lambda, d) point was chosen across bootstrap fits.
    pub tuning_choices: BTreeMap<String, usize>,
    pub issues: usize,
    /// Tests reported as NA and why.
    pub notes: Vec<String>,
    /// SHA-256 of every other file in the bundle.
    pub files: BTreeMap<String, String>,
}

/// Which parts of the pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scope {
    pub tests: bool,
    pub logit: bool,
    pub rank: bool,
    pub plots: bool,
}

impl Scope {
    pub const ALL: Scope = Scope { tests: true, logit: true, rank: true, plots: true };
}

#[derive(Debug, Clone)]
pub struct ReportOutcome {
    pub out: PathBuf,
    pub manifest: Manifest,
    pub bundle: Bundle,
    /// Data validation issues (rows excluded during ingestion).
    pub issues: usize,
}

/// Loads the input tables, or synthesizes a dataset with the run seed.
pub fn load_dataset(config: &RunConfig) -> Result<(Dataset, Option<SynthSummary>)> {
    match (&config.input, &config.synth) {
        (Some(p), None) => Ok((ingest(&p.patients, &p.tattoos, &p.treatments)?, None)),
        (None, Some(s)) => {
            let seed = config.seed.ok_or_else(|| Error::param("synthesis needs a seed"))?;
            let (ds, summary) = synthesize_documented(s, seed)?;
            Ok((ds, Some(summary)))
        }
        _ => Err(Error::param("either input paths or a synth config is required")),
    }
}

/// Design matrix and labels over rows complete on `features`.
pub fn model_matrix(rows: &[FeatureRow], features: &[Feature]) -> (Vec<Vec<f64>>, Vec<bool>) {
    rows.iter().filter_map(|r| r.complete(features).map(|x| (x, r.label))).unzip()
}

/// Issues found while loading, as CSV.
pub fn issues_csv(ds: &Dataset) -> Result<String> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["kind", "file", "row", "message"])?;
    for i in &ds.issues {
        let kind = serde_json::to_value(i.kind)?.as_str().unwrap_or_default().to_string();
        out.write_record([kind, i.file.clone(), i.row.map(|r| r.to_string()).unwrap_or_default(), i.message.clone()])?;
    }
    let bytes = out.into_inner().map_err(|e| Error::io("issues.csv", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn series_plots(ds: &Dataset, plots: &PlotConfig, bundle: &mut Bundle) {
    let mut idx: Vec<usize> = (0..ds.series.len()).collect();
    idx.sort_by_key(|&i| std::cmp::Reverse(ds.series[i].len()));
    let key = serde_json::to_value(plots.setting).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    for &i in idx.iter().take(plots.series) {
        let s = &ds.series[i];
        bundle.add(format!("plots/series_{}_{key}.svg", s.tattoo_id()), plot_series(s, plots.setting));
    }
}

/// Runs the full pipeline and writes the bundle to `config.out`.
pub fn run(config: &RunConfig) -> Result<ReportOutcome> {
    run_scoped(config, Scope::ALL)
}

/// As [`run`], restricted to the parts in `scope`. Loading, featurization and
/// correlation pruning always run.
pub fn run_scoped(config: &RunConfig, scope: Scope) -> Result<ReportOutcome> {
    stage("config", || config.validate())?;
    let seed = config.seed.expect("validated");
    let alpha = config.alpha;
    let mut stage_seeds = BTreeMap::new();
    let mut bundle = Bundle::default();
    let mut notes = Vec::new();

    let (ds, synth) = stage("load", || load_dataset(config))?;
    if synth.is_some() {
        stage_seeds.insert("synth".to_string(), seed);
    }
    bundle.add("issues.csv", stage("load", || issues_csv(&ds))?);

    let rows = featurize_dataset(&ds, config.mode);
    stage("featurize", || {
        let mut buf = Vec::new();
        write_features(&rows, &mut buf)?;
        bundle.add("features.csv", buf);
        Ok(())
    })?;

    if scope.tests {
        let rand_seed = derive_seed(seed, "randomization");
        stage_seeds.insert("randomization".to_string(), rand_seed);
        stage("tests", || {
            bundle.add_table(&proportion_table(&ds, alpha, &mut notes)?)?;
            bundle.add_table(&quartile_table(&ds, &rows, alpha, &mut notes)?)?;
            bundle.add_table(&ttest_table(&rows, alpha, &mut notes)?)?;
            let seeds = |f: Feature| derive_seed(rand_seed, f.key());
            bundle.add_table(&nonparametric_table(&rows, alpha, config.n_perm, seeds, &mut notes)?)?;
            bundle.add_table(&kruskal_table(&ds, &rows, alpha, &mut notes)?)?;
            Ok(())
        })?;
        stage("anova", || {
            let (a, t) = location_tables(&ds, &rows, alpha)?;
            bundle.add_table(&a)?;
            bundle.add_table(&t)
        })?;
    }

    let pruned = stage("prune", || prune_correlated(&rows, &Feature::ALL, config.prune_threshold))?;
    notes.extend(pruned.issues.iter().map(|i| i.message.clone()));
    let retained = pruned.retained.clone();
    let (x, y) = model_matrix(&rows, &retained);

    let fit: Option<LogitFit> = if scope.logit || scope.rank {
        Some(stage("logit", || fit_logit_rows(&rows, &retained, &LogitOptions::default()))?)
    } else {
        None
    };

    let mut ranking: Option<ImportanceRanking> = None;
    if scope.rank {
        let boot_seed = derive_seed(seed, "bootstrap");
        stage_seeds.insert("bootstrap".to_string(), boot_seed);
        let names: Vec<String> = retained.iter().map(|f| f.key().to_string()).collect();
        let r = stage("rank", || bootstrap_rank(&x, &y, &names, &config.boost, config.sims, boot_seed))?;
        stage("rank", || {
            let mut buf = Vec::new();
            write_rank_histogram(&r, &mut buf)?;
            bundle.add("rank_histogram.csv", buf);
            bundle.add_table(&model_table(&r, fit.as_ref().expect("fitted above"), alpha)?)
        })?;
        ranking = Some(r);
    }
    if let (Some(f), false) = (&fit, scope.rank) {
        bundle.add_table(&logit_table(f, alpha))?;
    }

    if scope.plots {
        series_plots(&ds, &config.plots, &mut bundle);
        if let (Some(r), true) = (&ranking, config.plots.rank_histograms) {
            bundle.add("plots/rank_histograms.svg", plot_rank_histograms(r, None));
        }
    }

    let mut tuning_choices = BTreeMap::new();
    for p in ranking.iter().flat_map(|r| &r.chosen) {
        *tuning_choices.entry(format!("B={} lambda={} d={}", p.trees, p.lambda, p.max_splits)).or_insert(0) += 1;
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        config_sha256: config.hash(),
        stage_seeds,
        feature_mode: config.mode,
        alpha,
        n_perm: config.n_perm,
        sims: config.sims,
        row_counts: ds.row_counts(),
        feature_rows: rows.len(),
        model_rows: fit.as_ref().map(|_| y.len()),
        synth,
        retained_features: retained.iter().map(|f| f.key().to_string()).collect(),
        removed_features: pruned
            .removed
            .iter()
            .map(|(f, m)| RemovedFeature { feature: f.key().to_string(), mean_abs_r: *m })
            .collect(),
        logit: fit.as_ref().map(|f| LogitSummary {
            converged: f.converged,
            iterations: f.iterations,
            log_likelihood: f.final_log_likelihood,
            warning: f.warning.clone(),
        }),
        tuning_choices,
        issues: ds.issues.len(),
        notes,
        files: bundle.digests(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    bundle.add("manifest.json", json);
    stage("write", || bundle.commit(&config.out))?;
    Ok(ReportOutcome { out: config.out.clone(), manifest, issues: ds.issues.len(), bundle })
}

/// Coefficient table for a logistic fit on its own (used when no ranking is run).
pub fn logit_table(fit: &LogitFit, alpha: f64) -> Table {
    let mut t = Table::new("logit", "Logistic regression", &["term", "estimate", "std_error", "z_value", "p_value"]);
    for (i, name) in fit.names.iter().enumerate() {
        let label = name.parse::<Feature>().map(|f| f.label().to_string()).unwrap_or_else(|_| name.clone());
        t.push(vec![
            label,
            format_num(fit.coefficients[i]),
            format_num(fit.standard_errors[i]),
            format_num(fit.wald_z[i]),
            format_p_star(fit.p_values[i], alpha),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_config_is_valid() {
        let c = RunConfig::demo();
        c.validate().unwrap();
        assert!(c.synth.is_some());
    }

    #[test]
    fn config_requires_one_source_and_a_seed() {
        let mut c = RunConfig { synth: Some(SynthConfig::default()), ..Default::default() };
        assert!(c.validate().is_err());
        c.seed = Some(1);
        c.validate().unwrap();
        c.input = Some(InputPaths { patients: "p".into(), tattoos: "t".into(), treatments: "e".into() });
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"seed": 1, "sims": 3, "nperm": 5}"#).is_err());
        let c = RunConfig::from_json(r#"{"seed": 1, "sims": 3}"#).unwrap();
        assert_eq!((c.seed, c.sims, c.n_perm), (Some(1), 3, 100_000));
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = RunConfig { seed: Some(3), out: "a".into(), ..Default::default() };
        let b = RunConfig { out: "b".into(), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), RunConfig { seed: Some(4), ..a.clone() }.hash());
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        assert_ne!(derive_seed(1, "bootstrap"), derive_seed(1, "randomization"));
        assert_eq!(derive_seed(9, "x"), derive_seed(9, "x"));
    }
}
