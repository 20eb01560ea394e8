//! Builders for the report tables. Every cell comes straight from a test or model
//! routine elsewhere in the crate; nothing is computed here beyond grouping rows.

use std::collections::{BTreeMap, HashMap};

use super::format::{format_num, format_p_star, Table};
use crate::boost::{cascade_label, ImportanceRanking};
use crate::data::{Dataset, PatientRecord, TattooRecord};
use crate::featurize::{quartile_bin, Feature, FeatureRow};
use crate::hypothesis::{
    chisq_independence, kruskal_wallis, one_way_anova, randomization_test, tukey_kramer, two_prop_z, welch_t,
    wilcoxon_rank_sum, RandomizationStatistic, TestReport,
};
use crate::logit::LogitFit;
use crate::stats::{mean, median};
use crate::{Error, Result};

pub const T4_HEADER: [&str; 4] = ["response_by_factor", "true", "false", "p_value"];
pub const T5_HEADER: [&str; 7] =
    ["response_by_factor", "parameter", "quartile_1", "quartile_2", "quartile_3", "quartile_4", "p_value"];
pub const T6_HEADER: [&str; 4] = ["treatment_parameter", "complication", "no_complication", "p_value"];
pub const T7_HEADER: [&str; 5] = ["treatment_parameter", "statistic", "complication", "no_complication", "p_value"];
pub const T8_HEADER: [&str; 6] = ["parameter", "quartile_1", "quartile_2", "quartile_3", "quartile_4", "p_value"];
pub const T10_HEADER: [&str; 6] =
    ["treatment_parameter", "total_rank", "rank_mode", "mode_frequency", "estimate", "p_value"];
pub const ANOVA_HEADER: [&str; 6] = ["source", "df", "sum_sq", "mean_sq", "f_value", "p_value"];
pub const TUKEY_HEADER: [&str; 8] =
    ["location_i", "location_j", "diff", "lower", "upper", "q_crit", "sigma_eps", "significant"];

/// Features compared with Welch's t test.
pub const T6_FEATURES: [Feature; 4] =
    [Feature::MeanFluence, Feature::MeanDiffFluence, Feature::MeanSpot, Feature::MeanDiffSpot];
/// Features compared with the rank-sum and randomization tests.
pub const T7_FEATURES: [Feature; 6] = [
    Feature::MeanWavelength,
    Feature::MeanDiffFrequency,
    Feature::SdSpot,
    Feature::MeanDiffWavelength,
    Feature::MeanFrequency,
    Feature::MeanDaysBetween,
];
/// Features compared across tattoo-age quartiles.
pub const T8_FEATURES: [Feature; 3] = [Feature::MeanFluence, Feature::MeanSpot, Feature::SdDiffFrequency];

/// A test that could not be run on this data, kept as a row with an `NA` p-value.
fn soft<T>(r: Result<T>, what: &str, notes: &mut Vec<String>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ (Error::Degenerate(_) | Error::InsufficientData(_))) => {
            notes.push(format!("{what}: {e}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn p_cell(rep: &Option<TestReport>, alpha: f64) -> String {
    format_p_star(rep.as_ref().map_or(f64::NAN, |r| r.p_value), alpha)
}

/// Complication status and counts for each tattoo and patient, preferring values
/// recorded in the tables and falling back to the treatment series.
pub struct Outcomes<'a> {
    ds: &'a Dataset,
    tattoo_label: HashMap<&'a str, bool>,
    tattoo_treatments: HashMap<&'a str, u32>,
    patient_label: HashMap<&'a str, bool>,
    patient_treatments: HashMap<&'a str, u32>,
    patient_tattoos: HashMap<&'a str, u32>,
}

impl<'a> Outcomes<'a> {
    pub fn new(ds: &'a Dataset) -> Self {
        let series: HashMap<&str, _> = ds.series.iter().map(|s| (s.tattoo_id(), s)).collect();
        let mut tattoo_label = HashMap::new();
        let mut tattoo_treatments = HashMap::new();
        let mut derived_label: HashMap<&str, bool> = HashMap::new();
        let mut derived_treat: HashMap<&str, u32> = HashMap::new();
        let mut derived_count: HashMap<&str, u32> = HashMap::new();
        for t in &ds.tattoos {
            let s = series.get(t.tattoo_id.as_str());
            let label = t.any_complication.or_else(|| s.map(|s| s.has_complication()));
            let treat = t.treatment_total.or_else(|| s.map(|s| s.len() as u32));
            if let Some(l) = label {
                tattoo_label.insert(t.tattoo_id.as_str(), l);
                *derived_label.entry(t.patient_id.as_str()).or_default() |= l;
            }
            if let Some(n) = treat {
                tattoo_treatments.insert(t.tattoo_id.as_str(), n);
                *derived_treat.entry(t.patient_id.as_str()).or_default() += n;
            }
            *derived_count.entry(t.patient_id.as_str()).or_default() += 1;
        }
        let mut patient_label = HashMap::new();
        let mut patient_treatments = HashMap::new();
        let mut patient_tattoos = HashMap::new();
        for p in &ds.patients {
            let id = p.patient_id.as_str();
            if let Some(l) = p.any_complication.or_else(|| derived_label.get(id).copied()) {
                patient_label.insert(id, l);
            }
            if let Some(n) = p.treatment_total.or_else(|| derived_treat.get(id).copied()) {
                patient_treatments.insert(id, n);
            }
            if let Some(n) = p.total_tattoos.or_else(|| derived_count.get(id).copied()) {
                patient_tattoos.insert(id, n);
            }
        }
        Outcomes { ds, tattoo_label, tattoo_treatments, patient_label, patient_treatments, patient_tattoos }
    }

    fn tattoos(&self) -> impl Iterator<Item = (&'a TattooRecord, bool)> + '_ {
        self.ds.tattoos.iter().filter_map(|t| self.tattoo_label.get(t.tattoo_id.as_str()).map(|&l| (t, l)))
    }

    fn patients(&self) -> impl Iterator<Item = (&'a PatientRecord, bool)> + '_ {
        self.ds.patients.iter().filter_map(|p| self.patient_label.get(p.patient_id.as_str()).map(|&l| (p, l)))
    }
}

/// (complications, total) among units with the factor, then among those without.
fn split_counts(pairs: impl Iterator<Item = (bool, bool)>) -> [u64; 4] {
    let mut c = [0u64; 4];
    for (factor, label) in pairs {
        let k = if factor { 0 } else { 2 };
        c[k] += u64::from(label);
        c[k + 1] += 1;
    }
    c
}

fn above_median<T: Copy + Into<f64>>(values: impl Iterator<Item = T> + Clone) -> impl Fn(T) -> bool {
    let v: Vec<f64> = values.map(Into::into).collect();
    let m = if v.is_empty() { f64::NAN } else { median(&v) };
    move |x: T| x.into() > m
}

/// Two-sample proportion tests of complication rates.
pub fn proportion_table(ds: &Dataset, alpha: f64, notes: &mut Vec<String>) -> Result<Table> {
    let o = Outcomes::new(ds);
    let mut t = Table::new("t4_proportions", "Complication rates by factor (two-proportion z test)", &T4_HEADER);

    let patient_age = above_median(ds.patients.iter().filter_map(|p| p.age));
    let tattoo_age = above_median(ds.tattoos.iter().filter_map(|t| t.tattoo_age));
    let fitz = above_median(ds.patients.iter().filter_map(|p| p.fitzpatrick.map(|f| f.level())));

    let rows: Vec<(&str, [u64; 4])> = vec![
        (
            "Tattoo Complication by Colored Tattoo",
            split_counts(o.tattoos().filter_map(|(t, l)| t.colored.map(|c| (c, l)))),
        ),
        (
            "Tattoo Complication by Professional",
            split_counts(o.tattoos().filter_map(|(t, l)| t.professional.map(|c| (c, l)))),
        ),
        (
            "Complication by Sex (Male/Female)",
            split_counts(o.patients().filter_map(|(p, l)| p.sex_male.map(|c| (c, l)))),
        ),
        (
            "Complication by Patient Median Age",
            split_counts(o.patients().filter_map(|(p, l)| p.age.map(|a| (patient_age(a), l)))),
        ),
        (
            "Complication by Patient Ethnicity",
            split_counts(o.patients().filter_map(|(p, l)| p.hispanic.map(|c| (c, l)))),
        ),
        (
            "Complication by Tattoo Median Age",
            split_counts(o.tattoos().filter_map(|(t, l)| t.tattoo_age.map(|a| (tattoo_age(a), l)))),
        ),
        (
            "Complication by Patient Fitzpatrick Score",
            split_counts(o.patients().filter_map(|(p, l)| p.fitzpatrick.map(|f| (fitz(f.level()), l)))),
        ),
    ];
    for (name, [xa, na, xb, nb]) in rows {
        let rep = soft(two_prop_z(xa, na, xb, nb), name, notes)?;
        let rate = |x: u64, n: u64| if n > 0 { format_num(x as f64 / n as f64) } else { "NA".into() };
        t.push(vec![name.into(), rate(xa, na), rate(xb, nb), p_cell(&rep, alpha)]);
    }
    Ok(t)
}

fn quartile_rows(
    t: &mut Table,
    name: &str,
    values: &[f64],
    labels: &[bool],
    alpha: f64,
    notes: &mut Vec<String>,
) -> Result<()> {
    let Some(bins) = soft(quartile_bin(values, labels), name, notes)? else {
        let na = || "NA".to_string();
        for param in ["Quartile", "n_i", "p_hat_i"] {
            t.push(vec![name.into(), param.into(), na(), na(), na(), na(), na()]);
        }
        return Ok(());
    };
    let occupied: Vec<usize> = (0..4).filter(|&b| bins.bin_counts[b] > 0).collect();
    let table: Vec<Vec<u64>> = vec![
        occupied.iter().map(|&b| bins.bin_positives[b] as u64).collect(),
        occupied.iter().map(|&b| (bins.bin_counts[b] - bins.bin_positives[b]) as u64).collect(),
    ];
    let rep = if occupied.len() >= 2 { soft(chisq_independence(&table), name, notes)? } else { None };
    let p = p_cell(&rep, alpha);
    let cell = |b: usize, v: f64| if bins.bin_counts[b] > 0 { format_num(v) } else { "NA".into() };
    let mut push = |param: &str, f: &dyn Fn(usize) -> String| {
        let mut row = vec![name.to_string(), param.to_string()];
        row.extend((0..4).map(f));
        row.push(p.clone());
        t.push(row);
    };
    push("Quartile", &|b| cell(b, bins.upper_bounds[b]));
    push("n_i", &|b| bins.bin_counts[b].to_string());
    push("p_hat_i", &|b| cell(b, bins.bin_rates[b]));
    Ok(())
}

/// Chi-square tests of complication rate across quartile bins of a factor.
/// Empty bins (possible with heavy ties) are dropped from the contingency table.
pub fn quartile_table(ds: &Dataset, rows: &[FeatureRow], alpha: f64, notes: &mut Vec<String>) -> Result<Table> {
    let o = Outcomes::new(ds);
    let mut t = Table::new("t5_quartiles", "Complication rates by factor quartile (chi-square test)", &T5_HEADER);

    let unzip = |pairs: Vec<(f64, bool)>| -> (Vec<f64>, Vec<bool>) { pairs.into_iter().unzip() };
    let tattoo_treat = unzip(
        o.tattoos()
            .filter_map(|(t, l)| o.tattoo_treatments.get(t.tattoo_id.as_str()).map(|&n| (f64::from(n), l)))
            .collect(),
    );
    let patient_tattoos = unzip(
        o.patients()
            .filter_map(|(p, l)| o.patient_tattoos.get(p.patient_id.as_str()).map(|&n| (f64::from(n), l)))
            .collect(),
    );
    let patient_treat = unzip(
        o.patients()
            .filter_map(|(p, l)| o.patient_treatments.get(p.patient_id.as_str()).map(|&n| (f64::from(n), l)))
            .collect(),
    );
    let fluence = unzip(rows.iter().map(|r| (r.mean_fluence, r.label)).collect());
    let tattoo_age = unzip(o.tattoos().filter_map(|(t, l)| t.tattoo_age.map(|a| (f64::from(a), l))).collect());
    let patient_age = unzip(o.patients().filter_map(|(p, l)| p.age.map(|a| (f64::from(a), l))).collect());

    for (name, (v, l)) in [
        ("Complication Rate by Total # of Treatments Tattoo", tattoo_treat),
        ("Complication Rate by Total # of Tattoos per Patient", patient_tattoos),
        ("Complication Rate by Total # of Treatments Patient", patient_treat),
        ("Complication Rate by Mean Fluence (J/cm^2)", fluence),
        ("Tattoo Complication Rate by Tattoo Age", tattoo_age),
        ("Patient Complication Rate by Patient Age", patient_age),
    ] {
        quartile_rows(&mut t, name, &v, &l, alpha, notes)?;
    }
    Ok(t)
}

fn by_label(rows: &[FeatureRow], f: Feature) -> (Vec<f64>, Vec<f64>) {
    let mut comp = Vec::new();
    let mut none = Vec::new();
    for r in rows {
        if let Some(v) = r.get(f) {
            if r.label {
                comp.push(v);
            } else {
                none.push(v);
            }
        }
    }
    (comp, none)
}

fn center_cells(rep: &Option<TestReport>) -> [String; 2] {
    match rep {
        Some(r) => [format_num(r.groups[0].center), format_num(r.groups[1].center)],
        None => ["NA".into(), "NA".into()],
    }
}

/// Welch t tests of complication vs no-complication feature means.
pub fn ttest_table(rows: &[FeatureRow], alpha: f64, notes: &mut Vec<String>) -> Result<Table> {
    let mut t = Table::new("t6_ttests", "Treatment parameters by complication (Welch t test)", &T6_HEADER);
    for f in T6_FEATURES {
        let (a, b) = by_label(rows, f);
        let rep = soft(welch_t(&a, &b), f.label(), notes)?;
        let [ca, cb] = center_cells(&rep);
        t.push(vec![f.label().into(), ca, cb, p_cell(&rep, alpha)]);
    }
    Ok(t)
}

/// Rank-sum (medians, `eta_hat`) and randomization (means, `mu_hat`) tests.
/// `seeds` maps each feature to its randomization seed.
pub fn nonparametric_table(
    rows: &[FeatureRow],
    alpha: f64,
    n_perm: u64,
    seeds: impl Fn(Feature) -> u64,
    notes: &mut Vec<String>,
) -> Result<Table> {
    let mut t = Table::new(
        "t7_nonparametric",
        "Treatment parameters by complication (Wilcoxon rank sum and randomization tests)",
        &T7_HEADER,
    );
    for f in T7_FEATURES {
        let (a, b) = by_label(rows, f);
        let w = soft(wilcoxon_rank_sum(&a, &b), f.label(), notes)?;
        let [wa, wb] = center_cells(&w);
        t.push(vec![f.label().into(), "eta_hat".into(), wa, wb, p_cell(&w, alpha)]);
        let r = soft(randomization_test(&a, &b, n_perm, seeds(f), RandomizationStatistic::MeanDiff), f.label(), notes)?;
        let [ra, rb] = center_cells(&r);
        t.push(vec![f.label().into(), "mu_hat".into(), ra, rb, p_cell(&r, alpha)]);
    }
    Ok(t)
}

/// Kruskal-Wallis tests of feature values across tattoo-age quartiles, reporting
/// the group means.
pub fn kruskal_table(ds: &Dataset, rows: &[FeatureRow], alpha: f64, notes: &mut Vec<String>) -> Result<Table> {
    let mut t =
        Table::new("t8_kruskal", "Treatment parameters by tattoo-age quartile (Kruskal-Wallis test)", &T8_HEADER);
    let age: HashMap<&str, f64> =
        ds.tattoos.iter().filter_map(|t| t.tattoo_age.map(|a| (t.tattoo_id.as_str(), f64::from(a)))).collect();
    let aged: Vec<(&FeatureRow, f64)> =
        rows.iter().filter_map(|r| age.get(r.tattoo_id.as_str()).map(|&a| (r, a))).collect();
    let ages: Vec<f64> = aged.iter().map(|&(_, a)| a).collect();
    let Some(bins) = soft(quartile_bin(&ages, &vec![false; ages.len()]), "tattoo-age quartiles", notes)? else {
        return Ok(t);
    };
    let bin_of = |a: f64| crate::featurize::bin_index(a, &bins.cut_points);
    let fill = |b: usize, v: String| if bins.bin_counts[b] > 0 { v } else { "NA".into() };

    let mut row = vec!["Quartile".to_string()];
    row.extend((0..4).map(|b| fill(b, format_num(bins.upper_bounds[b]))));
    row.push(String::new());
    t.push(row);
    let mut row = vec!["n_i".to_string()];
    row.extend(bins.bin_counts.iter().map(usize::to_string));
    row.push(String::new());
    t.push(row);

    for f in T8_FEATURES {
        let mut groups: [Vec<f64>; 4] = Default::default();
        for &(r, a) in &aged {
            if let Some(v) = r.get(f) {
                groups[bin_of(a)].push(v);
            }
        }
        let occupied: Vec<&Vec<f64>> = groups.iter().filter(|g| !g.is_empty()).collect();
        let rep = soft(kruskal_wallis(&occupied), f.label(), notes)?;
        let mut row = vec![format!("{} (mu_i)", f.label())];
        row.extend(groups.iter().map(|g| if g.is_empty() { "NA".into() } else { format_num(mean(g)) }));
        row.push(p_cell(&rep, alpha));
        t.push(row);
    }
    Ok(t)
}

/// Bootstrap importance ranks next to the logistic-regression coefficients, in
/// total-rank order. `ranking.features` and the fit's term names are feature keys.
pub fn model_table(ranking: &ImportanceRanking, fit: &LogitFit, alpha: f64) -> Result<Table> {
    let mut t = Table::new("t10_models", "Boosted-tree importance ranks and logistic regression", &T10_HEADER);
    let coef: HashMap<&str, usize> = fit.names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    for i in ranking.ordered() {
        let key = &ranking.features[i];
        let label = key.parse::<Feature>().map(Feature::label).unwrap_or(key.as_str());
        let j = *coef
            .get(key.as_str())
            .ok_or_else(|| Error::Input(format!("feature {key} is ranked but absent from the logistic fit")))?;
        t.push(vec![
            label.into(),
            ranking.total_rank[i].to_string(),
            cascade_label(ranking.rank_mode[i], ranking.total_rank[i]),
            ranking.mode_frequency[i].to_string(),
            format_num(fit.coefficients[j]),
            format_p_star(fit.p_values[j], alpha),
        ]);
    }
    Ok(t)
}

/// One-way ANOVA of mean fluence across body locations and the Tukey-Kramer
/// pairwise intervals. Locations are ordered by name.
pub fn location_tables(ds: &Dataset, rows: &[FeatureRow], alpha: f64) -> Result<(Table, Table)> {
    let loc: HashMap<&str, &str> =
        ds.tattoos.iter().filter_map(|t| t.body_category.as_deref().map(|c| (t.tattoo_id.as_str(), c))).collect();
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Some(c) = loc.get(r.tattoo_id.as_str()) {
            groups.entry(c).or_default().push(r.mean_fluence);
        }
    }
    groups.retain(|_, g| g.len() >= 2);
    let names: Vec<&str> = groups.keys().copied().collect();
    let values: Vec<&Vec<f64>> = groups.values().collect();

    let rep = one_way_anova(&values)?.with_alpha(alpha);
    let mut a = Table::new("anova_location", "Mean fluence by body location (one-way ANOVA)", &ANOVA_HEADER);
    let ssb = rep.extra("ss_between").unwrap_or(f64::NAN);
    let ssw = rep.extra("ss_within").unwrap_or(f64::NAN);
    let (df1, df2) = (rep.df[0], rep.df[1]);
    a.push(vec![
        "location".into(),
        format_num(df1),
        format_num(ssb),
        format_num(ssb / df1),
        format_num(rep.statistic),
        format_p_star(rep.p_value, alpha),
    ]);
    a.push(vec![
        "residuals".into(),
        format_num(df2),
        format_num(ssw),
        format_num(ssw / df2),
        String::new(),
        String::new(),
    ]);

    let mut tk = Table::new("tukey_location", "Pairwise mean-fluence differences (Tukey-Kramer)", &TUKEY_HEADER);
    for iv in tukey_kramer(&values, alpha)? {
        tk.push(vec![
            names[iv.group_i].into(),
            names[iv.group_j].into(),
            format_num(iv.diff),
            format_num(iv.lower()),
            format_num(iv.upper()),
            format_num(iv.q_crit),
            format_num(iv.sigma_eps_hat),
            if iv.significant { "yes" } else { "no" }.into(),
        ]);
    }
    Ok((a, tk))
}
