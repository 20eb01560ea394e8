use serde::{Deserialize, Serialize};

use super::{check_finite, Center, GroupSummary, Method, TestReport};
use crate::distributions::DistSpec;
use crate::stats::{mean, midranks, sum_sq_dev};
use crate::{Error, Result};

fn check_groups<S: AsRef<[f64]>>(groups: &[S], min_size: usize) -> Result<usize> {
    if groups.len() < 2 {
        return Err(Error::param(format!("need at least 2 groups, got {}", groups.len())));
    }
    let mut n = 0;
    for (i, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.len() < min_size {
            return Err(Error::InsufficientData(format!("group {i} has {} observations, need {min_size}", g.len())));
        }
        check_finite(g, "group")?;
        n += g.len();
    }
    if n <= groups.len() {
        return Err(Error::InsufficientData(format!("total N = {n} must exceed the group count {}", groups.len())));
    }
    Ok(n)
}

/// One-way ANOVA F test. `extras` carries `ss_between`, `ss_within`, `ms_within`
/// and `sigma_eps` (= sqrt(MS_within)).
pub fn one_way_anova<S: AsRef<[f64]>>(groups: &[S]) -> Result<TestReport> {
    let n = check_groups(groups, 2)?;
    let k = groups.len();
    let grand = groups.iter().flat_map(|g| g.as_ref()).sum::<f64>() / n as f64;
    let ss_within: f64 = groups.iter().map(|g| sum_sq_dev(g.as_ref())).sum();
    let ss_between: f64 = groups
        .iter()
        .map(|g| {
            let g = g.as_ref();
            g.len() as f64 * (mean(g) - grand).powi(2)
        })
        .sum();
    if ss_within <= 0.0 {
        return Err(Error::Degenerate("zero within-group variance in every group".into()));
    }
    let (df1, df2) = ((k - 1) as f64, (n - k) as f64);
    let ms_within = ss_within / df2;
    let f = (ss_between / df1) / ms_within;
    let p = DistSpec::F { df1, df2 }.sf(f)?;
    let summaries = groups
        .iter()
        .map(|g| GroupSummary { n: g.as_ref().len(), center: mean(g.as_ref()), kind: Center::Mean })
        .collect();
    Ok(TestReport::new(Method::OneWayAnova, f, p, summaries)
        .with_df(&[df1, df2])
        .with_extra("ss_between", ss_between)
        .with_extra("ss_within", ss_within)
        .with_extra("ms_within", ms_within)
        .with_extra("sigma_eps", ms_within.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyInterval {
    pub group_i: usize,
    pub group_j: usize,
    /// mean_i - mean_j
    pub diff: f64,
    pub half_width: f64,
    pub q_crit: f64,
    pub sigma_eps_hat: f64,
    pub significant: bool,
}

impl TukeyInterval {
    pub fn lower(&self) -> f64 {
        self.diff - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.diff + self.half_width
    }
}

/// Tukey-Kramer simultaneous intervals for all pairwise mean differences:
/// `diff ± q(1 - alpha; k, N - k) / sqrt(2) · sigma_eps · sqrt(1/n_i + 1/n_j)`.
pub fn tukey_kramer<S: AsRef<[f64]>>(groups: &[S], alpha: f64) -> Result<Vec<TukeyInterval>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let anova = one_way_anova(groups)?;
    let sigma = anova.extra("sigma_eps").expect("anova reports sigma_eps");
    let k = groups.len() as u32;
    let q = DistSpec::StudentizedRange { k, df: anova.df[1] }.quantile(1.0 - alpha)?;
    let means: Vec<f64> = anova.groups.iter().map(|g| g.center).collect();
    let sizes: Vec<f64> = anova.groups.iter().map(|g| g.n as f64).collect();
    let mut out = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let diff = means[i] - means[j];
            let half = q / std::f64::consts::SQRT_2 * sigma * (1.0 / sizes[i] + 1.0 / sizes[j]).sqrt();
            out.push(TukeyInterval {
                group_i: i,
                group_j: j,
                diff,
                half_width: half,
                q_crit: q,
                sigma_eps_hat: sigma,
                significant: diff.abs() > half,
            });
        }
    }
    Ok(out)
}

/// Kruskal-Wallis H test on midranks, divided by the tie correction
/// 1 - sum(t^3 - t) / (N^3 - N); chi-square(k - 1) reference.
pub fn kruskal_wallis<S: AsRef<[f64]>>(groups: &[S]) -> Result<TestReport> {
    let n = check_groups(groups, 1)?;
    let k = groups.len();
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.as_ref().iter().copied()).collect();
    let (ranks, ties) = midranks(&pooled);
    let nf = n as f64;
    let correction = 1.0 - ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Err(Error::Degenerate("all observations are identical".into()));
    }
    let mut start = 0;
    let mut h = 0.0;
    for g in groups {
        let len = g.as_ref().len();
        let r: f64 = ranks[start..start + len].iter().sum();
        h += r * r / len as f64;
        start += len;
    }
    h = (12.0 / (nf * (nf + 1.0)) * h - 3.0 * (nf + 1.0)) / correction;
    let h = h.max(0.0);
    let df = (k - 1) as f64;
    let p = DistSpec::ChiSquare { df }.sf(h)?;
    let summaries = groups
        .iter()
        .map(|g| GroupSummary { n: g.as_ref().len(), center: mean(g.as_ref()), kind: Center::Mean })
        .collect();
    let mut rep =
        TestReport::new(Method::KruskalWallis, h, p, summaries).with_df(&[df]).with_extra("tie_correction", correction);
    if !ties.is_empty() {
        rep.notes.push("tie correction applied".into());
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{welch_t, wilcoxon_rank_sum};
    use approx::assert_relative_eq;

    #[test]
    fn identical_groups() {
        let g = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]];
        let a = one_way_anova(&g).unwrap();
        assert_eq!(a.statistic, 0.0);
        assert_eq!(a.p_value, 1.0);
        let kw = kruskal_wallis(&g).unwrap();
        assert!(kw.statistic.abs() < 1e-12);
        assert_relative_eq!(kw.p_value, 1.0, epsilon = 1e-12);
        let t = tukey_kramer(&g, 0.1).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.iter().all(|iv| iv.diff == 0.0 && !iv.significant));
    }

    #[test]
    fn brute_force_sums_of_squares() {
        let g = vec![vec![2.09, 2.3, 1.9, 2.2], vec![1.99, 1.8, 2.0], vec![2.1, 2.5, 2.4, 2.2, 2.6]];
        let a = one_way_anova(&g).unwrap();
        let all: Vec<f64> = g.iter().flatten().copied().collect();
        let grand = all.iter().sum::<f64>() / all.len() as f64;
        let mut ssb = 0.0;
        let mut ssw = 0.0;
        for grp in &g {
            let m = grp.iter().sum::<f64>() / grp.len() as f64;
            for x in grp {
                ssw += (x - m) * (x - m);
                ssb += (m - grand) * (m - grand);
            }
        }
        let f = (ssb / 2.0) / (ssw / 9.0);
        assert_relative_eq!(a.statistic, f, epsilon = 1e-10);
    }

    #[test]
    fn two_group_anova_is_pooled_t_squared() {
        let a = [1.0, 2.5, 3.1, 4.2, 2.2];
        let b = [3.3, 4.1, 5.0, 3.8];
        let an = one_way_anova(&[&a[..], &b[..]]).unwrap();
        let sp2 = (sum_sq_dev(&a) + sum_sq_dev(&b)) / 7.0;
        let t = (mean(&a) - mean(&b)) / (sp2 * (1.0 / 5.0 + 1.0 / 4.0)).sqrt();
        assert_relative_eq!(an.statistic, t * t, epsilon = 1e-10);
        let pt = 2.0 * DistSpec::StudentT { df: 7.0 }.sf(t.abs()).unwrap();
        assert_relative_eq!(an.p_value, pt, epsilon = 1e-10);
        // Welch differs from pooled t in general
        assert!(welch_t(&a, &b).is_ok());
    }

    #[test]
    fn two_group_kw_is_rank_sum_z_squared() {
        let a = [1.1, 4.2, 3.3, 7.4, 0.5, 6.6];
        let b = [2.7, 8.8, 9.9, 5.1, 10.2, 11.3, 12.0];
        let kw = kruskal_wallis(&[&a[..], &b[..]]).unwrap();
        let w = wilcoxon_rank_sum(&a, &b).unwrap();
        let z = w.extra("z").unwrap();
        assert_relative_eq!(kw.statistic, z * z, epsilon = 1e-10);
    }

    #[test]
    fn tukey_equal_n_reduction() {
        let g = vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 3.5, 4.0, 5.5], vec![6.0, 7.0, 5.5, 8.0]];
        let t = tukey_kramer(&g, 0.05).unwrap();
        for iv in &t {
            let reduced = iv.q_crit * iv.sigma_eps_hat / 2.0;
            assert_relative_eq!(iv.half_width, reduced, epsilon = 1e-10);
            assert_eq!(iv.significant, iv.lower() > 0.0 || iv.upper() < 0.0);
        }
        assert!(t.iter().find(|iv| iv.group_i == 0 && iv.group_j == 2).unwrap().significant);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(one_way_anova(&[vec![1.0, 1.0], vec![2.0, 2.0]]), Err(Error::Degenerate(_))));
        assert!(matches!(kruskal_wallis(&[vec![1.0, 1.0], vec![1.0, 1.0]]), Err(Error::Degenerate(_))));
        assert!(one_way_anova(&[vec![1.0, 2.0]]).is_err());
        assert!(one_way_anova(&[vec![1.0], vec![2.0, 3.0]]).is_err());
        assert!(kruskal_wallis(&[vec![1.0], vec![2.0]]).is_err());
    }
}
