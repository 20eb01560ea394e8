use super::{Center, GroupSummary, Method, TestReport};
use crate::distributions::{two_sided_normal_p, DistSpec};
use crate::{Error, Result};

/// Pooled-variance two-proportion z test of H0: p_a = p_b (two-sided).
pub fn two_prop_z(x_a: u64, n_a: u64, x_b: u64, n_b: u64) -> Result<TestReport> {
    if n_a == 0 || n_b == 0 || x_a > n_a || x_b > n_b {
        return Err(Error::param(format!("need 0 <= x <= n and n >= 1 (got {x_a}/{n_a}, {x_b}/{n_b})")));
    }
    let (pa, pb) = (x_a as f64 / n_a as f64, x_b as f64 / n_b as f64);
    let pooled = (x_a + x_b) as f64 / (n_a + n_b) as f64;
    if pooled == 0.0 || pooled == 1.0 {
        return Err(Error::Degenerate(format!("pooled proportion is {pooled}; variance is zero")));
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / n_a as f64 + 1.0 / n_b as f64)).sqrt();
    let z = (pa - pb) / se;
    let groups = vec![
        GroupSummary { n: n_a as usize, center: pa, kind: Center::Proportion },
        GroupSummary { n: n_b as usize, center: pb, kind: Center::Proportion },
    ];
    Ok(TestReport::new(Method::TwoProportionZ, z, two_sided_normal_p(z), groups).with_extra("pooled", pooled))
}

/// Pearson chi-square test of independence on an r x c table of counts.
pub fn chisq_independence<R: AsRef<[u64]>>(table: &[R]) -> Result<TestReport> {
    let r = table.len();
    let c = table.first().map(|row| row.as_ref().len()).unwrap_or(0);
    if r < 2 || c < 2 {
        return Err(Error::param(format!("contingency table must be at least 2 x 2, got {r} x {c}")));
    }
    if table.iter().any(|row| row.as_ref().len() != c) {
        return Err(Error::param("contingency table rows differ in length"));
    }
    let row_sums: Vec<f64> = table.iter().map(|row| row.as_ref().iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..c).map(|j| table.iter().map(|row| row.as_ref()[j]).sum::<u64>() as f64).collect();
    if row_sums.iter().chain(&col_sums).any(|&s| s == 0.0) {
        return Err(Error::Degenerate("contingency table has an empty row or column".into()));
    }
    let total: f64 = row_sums.iter().sum();
    let mut stat = 0.0;
    let mut small = 0;
    for (i, row) in table.iter().enumerate() {
        for (j, &o) in row.as_ref().iter().enumerate() {
            let e = row_sums[i] * col_sums[j] / total;
            if e < 5.0 {
                small += 1;
            }
            stat += (o as f64 - e).powi(2) / e;
        }
    }
    let df = ((r - 1) * (c - 1)) as f64;
    let p = DistSpec::ChiSquare { df }.sf(stat)?;
    // one group per column: the first row's share of the column total
    let groups = (0..c)
        .map(|j| GroupSummary {
            n: col_sums[j] as usize,
            center: table[0].as_ref()[j] as f64 / col_sums[j],
            kind: Center::Proportion,
        })
        .collect();
    let mut rep = TestReport::new(Method::ChiSquareIndependence, stat, p, groups).with_df(&[df]);
    if small > 0 {
        rep.notes.push(format!("{small} expected count(s) below 5; chi-square approximation may be poor"));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equal_proportions() {
        let r = two_prop_z(5, 50, 10, 100).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.significant);
    }

    #[test]
    fn swap_negates_z() {
        let a = two_prop_z(12, 40, 30, 200).unwrap();
        let b = two_prop_z(30, 200, 12, 40).unwrap();
        assert_eq!(a.statistic, -b.statistic);
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn degenerate_and_bad_counts() {
        assert!(matches!(two_prop_z(0, 10, 0, 20), Err(Error::Degenerate(_))));
        assert!(matches!(two_prop_z(10, 10, 20, 20), Err(Error::Degenerate(_))));
        assert!(two_prop_z(11, 10, 0, 20).is_err());
        assert!(two_prop_z(0, 0, 0, 20).is_err());
    }

    #[test]
    fn chisq_identical_rows() {
        let r = chisq_independence(&[[10u64, 10], [20, 20]]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn chisq_hand_computed() {
        // [[10, 20], [30, 40]]: N = 100, rows 30/70, cols 40/60
        // E = [[12, 18], [28, 42]]
        let hand = 4.0 / 12.0 + 4.0 / 18.0 + 4.0 / 28.0 + 4.0 / 42.0;
        let r = chisq_independence(&[[10u64, 20], [30, 40]]).unwrap();
        assert_relative_eq!(r.statistic, hand, epsilon = 1e-12);
        assert_eq!(r.df, vec![1.0]);
        // chi-square(1) upper tail = erfc(sqrt(x / 2))
        let p = crate::distributions::special::erfc((hand / 2.0).sqrt());
        assert_relative_eq!(r.p_value, p, epsilon = 1e-12);
        // permuting rows and columns
        let s = chisq_independence(&[[40u64, 30], [20, 10]]).unwrap();
        assert_relative_eq!(s.statistic, r.statistic, epsilon = 1e-12);
    }

    #[test]
    fn chisq_errors_and_notes() {
        assert!(matches!(chisq_independence(&[[0u64, 0], [1, 2]]), Err(Error::Degenerate(_))));
        assert!(chisq_independence(&[[1u64, 2]]).is_err());
        let r = chisq_independence(&[[1u64, 2], [3, 4]]).unwrap();
        assert_eq!(r.notes.len(), 1);
    }
}
