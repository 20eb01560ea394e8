//! Distribution of the studentized range Q = (max - min) / s of `k` standard normals,
//! where `s^2` is an independent chi-square(df) / df variate.
//!
//! The CDF is the double integral
//!
//! ```text
//! P(Q <= q) = ∫_0^∞ f_df(s) · W(q s) ds,     W(w) = k ∫ φ(z) [Φ(z + w) - Φ(z)]^(k-1) dz
//! ```
//!
//! with `f_df` the density of `s`, and `z` the location of the sample minimum.

use super::quad::integrate;
use super::special::ln_gamma;
use super::{norm_cdf, norm_pdf};

const Z_LIMIT: f64 = 8.5;

/// P(range of k standard normals <= w).
pub(crate) fn range_cdf(w: f64, k: u32) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let km1 = (k - 1) as i32;
    let integrand = |z: f64| norm_pdf(z) * (norm_cdf(z + w) - norm_cdf(z)).max(0.0).powi(km1);
    let v = k as f64 * integrate(&integrand, -Z_LIMIT, Z_LIMIT, 1e-11, 30);
    v.clamp(0.0, 1.0)
}

/// `2 ln(1 + u) - 2u - u^2`, summed as a series near zero to avoid cancellation.
fn log_kernel(u: f64) -> f64 {
    if u.abs() > 0.25 {
        return 2.0 * u.ln_1p() - 2.0 * u - u * u;
    }
    let mut acc = -2.0 * u * u;
    let mut pow = u * u;
    for m in 3..80 {
        pow *= u;
        let term = 2.0 * pow / m as f64;
        acc += if m % 2 == 1 { term } else { -term };
        if term.abs() < 1e-18 * acc.abs() {
            break;
        }
    }
    acc
}

fn ln_scale_density(s: f64, df: f64) -> f64 {
    let h = 0.5 * df;
    if h < 10.0 {
        return std::f64::consts::LN_2 + h * h.ln() - ln_gamma(h) + (df - 1.0) * s.ln() - h * s * s;
    }
    // Stirling form of h ln h - ln Γ(h), regrouped around s = 1
    let h2 = h * h;
    let stirling = (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * h2)) / h2) / h2) / h;
    std::f64::consts::LN_2 + 0.5 * (h / (2.0 * std::f64::consts::PI)).ln() - stirling - s.ln() + h * log_kernel(s - 1.0)
}

pub(crate) fn cdf(q: f64, k: u32, df: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return 1.0;
    }
    if df.is_infinite() {
        return range_cdf(q, k);
    }
    let mode = if df > 1.0 { ((df - 1.0) / df).sqrt() } else { 0.0 };
    let spread = 13.0 / (2.0 * df).sqrt();
    let lo = (mode - spread).max(0.0);
    let hi = mode + spread;
    let integrand = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        ln_scale_density(s, df).exp() * range_cdf(q * s, k)
    };
    integrate(&integrand, lo, hi, 1e-10, 24).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scale_density_integrates_to_one() {
        for &df in &[1.0f64, 2.0, 5.0, 30.0, 1e6] {
            let mode = if df > 1.0 { ((df - 1.0) / df).sqrt() } else { 0.0 };
            let spread = 13.0 / (2.0 * df).sqrt();
            let v = integrate(
                &|s: f64| if s > 0.0 { ln_scale_density(s, df).exp() } else { 0.0 },
                (mode - spread).max(0.0),
                mode + spread,
                1e-12,
                30,
            );
            assert_relative_eq!(v, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn stirling_branch_matches_direct() {
        for &df in &[20.0, 21.0, 40.0, 75.0] {
            let h = 0.5 * df;
            for &s in &[0.6, 0.9, 1.0, 1.07, 1.4] {
                let direct =
                    std::f64::consts::LN_2 + h * f64::ln(h) - ln_gamma(h) + (df - 1.0) * f64::ln(s) - h * s * s;
                assert_relative_eq!(ln_scale_density(s, df), direct, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn two_group_range_is_scaled_half_normal() {
        // |Z1 - Z2| = sqrt(2)|Z|, so P(range <= w) = 2 Φ(w / sqrt 2) - 1
        for &w in &[0.1, 0.7, 1.5, 2.77, 4.0] {
            let expect = 2.0 * norm_cdf(w / std::f64::consts::SQRT_2) - 1.0;
            assert_relative_eq!(range_cdf(w, 2), expect, epsilon = 1e-11);
        }
    }
}
