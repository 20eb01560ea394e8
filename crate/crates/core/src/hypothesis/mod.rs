//! Hypothesis-test battery: two-sample and k-sample proportion tests, Welch t,
//! Wilcoxon rank sum, a label-permutation randomization test, one-way ANOVA with
//! Tukey-Kramer intervals, and Kruskal-Wallis.
//!
//! Every test returns a [`TestReport`] at the default significance level
//! [`DEFAULT_ALPHA`]; use [`TestReport::with_alpha`] to re-judge at another level.

mod anova;
mod location;
mod proportion;
mod randomization;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use anova::{kruskal_wallis, one_way_anova, tukey_kramer, TukeyInterval};
pub use location::{welch_t, wilcoxon_rank_sum};
pub use proportion::{chisq_independence, two_prop_z};
pub use randomization::{randomization_test, RandomizationStatistic, MAX_PERMUTATIONS};

pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TwoProportionZ,
    ChiSquareIndependence,
    WelchT,
    WilcoxonRankSum,
    Randomization,
    OneWayAnova,
    KruskalWallis,
}

/// What `GroupSummary::center` holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Center {
    Proportion,
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub center: f64,
    pub kind: Center,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: Method,
    pub statistic: f64,
    /// Degrees of freedom of the reference distribution, if any.
    pub df: Vec<f64>,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
    pub groups: Vec<GroupSummary>,
    pub notes: Vec<String>,
    /// Named auxiliary quantities (e.g. `sigma_eps`, `z`, `u_b`).
    pub extras: BTreeMap<String, f64>,
}

impl TestReport {
    pub(crate) fn new(method: Method, statistic: f64, p_value: f64, groups: Vec<GroupSummary>) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestReport {
            method,
            statistic,
            df: Vec::new(),
            p_value,
            alpha: DEFAULT_ALPHA,
            significant: p_value < DEFAULT_ALPHA,
            groups,
            notes: Vec::new(),
            extras: BTreeMap::new(),
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self.significant = self.p_value < alpha;
        self
    }

    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.get(name).copied()
    }

    pub(crate) fn with_extra(mut self, name: &str, v: f64) -> Self {
        self.extras.insert(name.to_string(), v);
        self
    }

    pub(crate) fn with_df(mut self, df: &[f64]) -> Self {
        self.df = df.to_vec();
        self
    }
}

pub(crate) fn check_finite(xs: &[f64], what: &str) -> crate::Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(crate::Error::Input(format!("{what} contains non-finite values")))
    }
}
