use super::{check_finite, Center, GroupSummary, Method, TestReport};
use crate::distributions::{two_sided_normal_p, DistSpec};
use crate::stats::{mean, median, midranks, sample_var};
use crate::{Error, Result};

/// Combined size at or below which tie-free rank-sum tests use the exact null.
pub const EXACT_RANK_SUM_MAX_N: usize = 12;

/// Welch's unequal-variance two-sample t test (two-sided).
pub fn welch_t(sample_a: &[f64], sample_b: &[f64]) -> Result<TestReport> {
    if sample_a.len() < 2 || sample_b.len() < 2 {
        return Err(Error::InsufficientData("Welch t needs at least 2 observations per sample".into()));
    }
    check_finite(sample_a, "sample_a")?;
    check_finite(sample_b, "sample_b")?;
    let (na, nb) = (sample_a.len() as f64, sample_b.len() as f64);
    let (ma, mb) = (mean(sample_a), mean(sample_b));
    let (va, vb) = (sample_var(sample_a), sample_var(sample_b));
    if va == 0.0 && vb == 0.0 {
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p = (2.0 * DistSpec::StudentT { df }.sf(t.abs())?).min(1.0);
    let groups = vec![
        GroupSummary { n: sample_a.len(), center: ma, kind: Center::Mean },
        GroupSummary { n: sample_b.len(), center: mb, kind: Center::Mean },
    ];
    Ok(TestReport::new(Method::WelchT, t, p, groups).with_df(&[df]))
}

/// Number of size-`k` subsets of {1..n} with each possible rank sum.
fn rank_sum_counts(n: usize, k: usize) -> Vec<u64> {
    let max_sum = n * (n + 1) / 2;
    let mut ways = vec![vec![0u64; max_sum + 1]; k + 1];
    ways[0][0] = 1;
    for r in 1..=n {
        for j in (1..=k.min(r)).rev() {
            for s in (r..=max_sum).rev() {
                ways[j][s] += ways[j - 1][s - r];
            }
        }
    }
    ways.swap_remove(k)
}

/// Wilcoxon rank-sum (Mann-Whitney) test, two-sided.
///
/// The statistic is U_a = W_a - n_a(n_a + 1)/2 with midranks for ties. Small tie-free
/// problems (n_a + n_b <= 12) use the exact permutation null; otherwise the normal
/// approximation with tie-corrected variance and a 0.5 continuity correction.
/// `extras["z"]` carries the uncorrected standardized statistic, `extras["u_b"]` the
/// complementary U.
pub fn wilcoxon_rank_sum(sample_a: &[f64], sample_b: &[f64]) -> Result<TestReport> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::InsufficientData("rank-sum test needs non-empty samples".into()));
    }
    check_finite(sample_a, "sample_a")?;
    check_finite(sample_b, "sample_b")?;
    let (na, nb) = (sample_a.len(), sample_b.len());
    let n = na + nb;
    let pooled: Vec<f64> = sample_a.iter().chain(sample_b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w_a: f64 = ranks[..na].iter().sum();
    let u_a = w_a - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;
    let mu = (na * nb) as f64 / 2.0;
    let tie_sum: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = (na * nb) as f64 / 12.0 * ((n + 1) as f64 - tie_sum / (n * (n - 1)).max(1) as f64);

    let groups = vec![
        GroupSummary { n: na, center: median(sample_a), kind: Center::Median },
        GroupSummary { n: nb, center: median(sample_b), kind: Center::Median },
    ];
    let z = if var > 0.0 { (u_a - mu) / var.sqrt() } else { 0.0 };

    let (p, note) = if ties.is_empty() && n <= EXACT_RANK_SUM_MAX_N {
        let counts = rank_sum_counts(n, na);
        let offset = na * (na + 1) / 2;
        let total: u64 = counts.iter().sum();
        // compare |2U - n_a n_b| in integers
        let obs = (2.0 * u_a - (na * nb) as f64).abs().round() as i64;
        let hits: u64 = counts
            .iter()
            .enumerate()
            .skip(offset)
            .filter(|(w, _)| (2 * (*w - offset) as i64 - (na * nb) as i64).abs() >= obs)
            .map(|(_, &c)| c)
            .sum();
        (hits as f64 / total as f64, "exact null distribution".to_string())
    } else if var <= 0.0 {
        (1.0, "all observations tied; no evidence of a shift".to_string())
    } else {
        let zc = ((u_a - mu).abs() - 0.5).max(0.0) / var.sqrt();
        let tie_note = if ties.is_empty() { "" } else { ", tie-corrected variance" };
        (two_sided_normal_p(zc), format!("normal approximation with continuity correction{tie_note}"))
    };
    let mut rep = TestReport::new(Method::WilcoxonRankSum, u_a, p, groups).with_extra("z", z).with_extra("u_b", u_b);
    rep.notes.push(note);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn welch_identical_samples() {
        let a = [1.0, 2.0, 3.5, 4.0];
        let r = welch_t(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn welch_formula_and_scale_invariance() {
        let a = [2.1, 1.7, 2.4, 1.9, 2.6, 2.2];
        let b = [1.2, 1.9, 1.4, 1.1, 1.6];
        let r = welch_t(&a, &b).unwrap();
        // closed form
        let (ma, mb) = (mean(&a), mean(&b));
        let (va, vb) = (sample_var(&a) / 6.0, sample_var(&b) / 5.0);
        let t = (ma - mb) / (va + vb).sqrt();
        let df = (va + vb).powi(2) / (va * va / 5.0 + vb * vb / 4.0);
        assert_relative_eq!(r.statistic, t, epsilon = 1e-12);
        assert_relative_eq!(r.df[0], df, epsilon = 1e-10);
        let s: Vec<f64> = a.iter().map(|x| x * 3.7).collect();
        let u: Vec<f64> = b.iter().map(|x| x * 3.7).collect();
        let r2 = welch_t(&s, &u).unwrap();
        assert_relative_eq!(r.statistic, r2.statistic, epsilon = 1e-12);
        assert_relative_eq!(r.p_value, r2.p_value, epsilon = 1e-12);
    }

    #[test]
    fn welch_errors() {
        assert!(matches!(welch_t(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::Degenerate(_))));
        assert!(welch_t(&[1.0], &[2.0, 3.0]).is_err());
    }

    #[test]
    fn rank_sum_exact_extreme() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_relative_eq!(r.p_value, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.extra("u_b"), Some(4.0));
    }

    #[test]
    fn rank_sum_identical_samples() {
        let a = [1.0, 2.0, 3.0];
        let r = wilcoxon_rank_sum(&a, &a).unwrap();
        assert_eq!(r.p_value, 1.0);
        let r = wilcoxon_rank_sum(&[5.0; 4], &[5.0; 3]).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn exact_null_matches_enumeration() {
        // brute-force over all splits of ranks 1..7 into 3 + 4
        let a = [0.3, 2.2, 5.1];
        let b = [0.9, 1.4, 3.3, 4.4];
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        let pooled: Vec<f64> = a.iter().chain(&b).copied().collect();
        let u_of = |mask: u32| -> f64 {
            let mut u = 0.0;
            for i in 0..7 {
                if mask & (1 << i) == 0 {
                    continue;
                }
                for j in 0..7 {
                    if mask & (1 << j) == 0 && pooled[i] > pooled[j] {
                        u += 1.0;
                    }
                }
            }
            u
        };
        let obs = (u_of(0b0000111) - 6.0).abs();
        let splits: Vec<u32> = (0u32..128).filter(|m| m.count_ones() == 3).collect();
        let hits = splits.iter().filter(|&&m| (u_of(m) - 6.0).abs() >= obs).count();
        assert_relative_eq!(r.p_value, hits as f64 / splits.len() as f64, epsilon = 1e-15);
    }

    #[test]
    fn u_identity() {
        let a = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0];
        let b = [6.0, 5.0, 3.0, 5.0, 8.0, 9.0, 7.0, 9.0];
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        assert_eq!(r.statistic + r.extra("u_b").unwrap(), (a.len() * b.len()) as f64);
    }
}
