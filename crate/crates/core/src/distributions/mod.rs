//! Reference distributions used by the hypothesis tests.
//!
//! Student t, chi-square and F are evaluated through the regularized incomplete
//! beta/gamma functions; the studentized range by adaptive quadrature of its
//! double-integral representation. All quantiles are found by bracketed bisection
//! followed by a safeguarded Newton polish.

mod quad;
pub mod special;
mod studentized;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use special::{erfc, inc_beta, inc_gamma, ln_beta, ln_gamma};

/// Tolerance for the studentized-range quantile search (in units of q).
pub const STUDENTIZED_RANGE_QUANTILE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistSpec {
    /// Standard normal.
    Normal,
    StudentT {
        df: f64,
    },
    ChiSquare {
        df: f64,
    },
    F {
        df1: f64,
        df2: f64,
    },
    /// Range of `k` standard normals divided by an independent sqrt(chi2(df)/df).
    /// `df = f64::INFINITY` gives the plain normal range.
    StudentizedRange {
        k: u32,
        df: f64,
    },
}

fn check_df(name: &str, df: f64) -> Result<()> {
    if df > 0.0 && !df.is_nan() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be > 0, got {df}")))
    }
}

pub(crate) fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub(crate) fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Two-sided normal p-value for a z statistic.
pub(crate) fn two_sided_normal_p(z: f64) -> f64 {
    (2.0 * norm_sf(z.abs())).min(1.0)
}

impl DistSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DistSpec::Normal => Ok(()),
            DistSpec::StudentT { df } | DistSpec::ChiSquare { df } => check_df("df", df),
            DistSpec::F { df1, df2 } => check_df("df1", df1).and(check_df("df2", df2)),
            DistSpec::StudentizedRange { k, df } => {
                if k < 2 {
                    return Err(Error::param(format!("studentized range needs k >= 2, got {k}")));
                }
                check_df("df", df)
            }
        }
    }

    fn support_lower(&self) -> f64 {
        match self {
            DistSpec::Normal | DistSpec::StudentT { .. } => f64::NEG_INFINITY,
            _ => 0.0,
        }
    }

    /// Lower and upper tail probabilities at `x`, each computed directly so that
    /// small upper tails keep their relative accuracy.
    fn tails(&self, x: f64) -> Result<(f64, f64)> {
        self.validate()?;
        if x.is_nan() {
            return Err(Error::param("x must not be NaN"));
        }
        match *self {
            DistSpec::Normal => Ok((norm_cdf(x), norm_sf(x))),
            DistSpec::StudentT { df } => {
                if x.is_infinite() {
                    return Ok(if x > 0.0 { (1.0, 0.0) } else { (0.0, 1.0) });
                }
                let (ib, _) = inc_beta(0.5 * df, 0.5, df / (df + x * x))?;
                let tail = 0.5 * ib;
                Ok(if x >= 0.0 { (1.0 - tail, tail) } else { (tail, 1.0 - tail) })
            }
            DistSpec::ChiSquare { df } => inc_gamma(0.5 * df, 0.5 * x.max(0.0)),
            DistSpec::F { df1, df2 } => {
                if x <= 0.0 {
                    return Ok((0.0, 1.0));
                }
                if x.is_infinite() {
                    return Ok((1.0, 0.0));
                }
                let u = df1 * x;
                // I_{u/(u+df2)}(df1/2, df2/2), complement from the mirrored argument
                let (lo, _) = inc_beta(0.5 * df1, 0.5 * df2, u / (u + df2))?;
                let (hi, _) = inc_beta(0.5 * df2, 0.5 * df1, df2 / (u + df2))?;
                Ok((lo, hi))
            }
            DistSpec::StudentizedRange { k, df } => {
                let c = studentized::cdf(x, k, df);
                Ok((c, 1.0 - c))
            }
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.tails(x).map(|t| t.0)
    }

    /// Survival function 1 - cdf(x).
    pub fn sf(&self, x: f64) -> Result<f64> {
        self.tails(x).map(|t| t.1)
    }

    /// Density; the studentized range density is not needed by any caller.
    fn pdf(&self, x: f64) -> Option<f64> {
        let v = match *self {
            DistSpec::Normal => norm_pdf(x),
            DistSpec::StudentT { df } => (ln_gamma(0.5 * (df + 1.0))
                - ln_gamma(0.5 * df)
                - 0.5 * (df * std::f64::consts::PI).ln()
                - 0.5 * (df + 1.0) * (x * x / df).ln_1p())
            .exp(),
            DistSpec::ChiSquare { df } => {
                if x <= 0.0 {
                    return Some(0.0);
                }
                let h = 0.5 * df;
                ((h - 1.0) * x.ln() - 0.5 * x - h * std::f64::consts::LN_2 - ln_gamma(h)).exp()
            }
            DistSpec::F { df1, df2 } => {
                if x <= 0.0 {
                    return Some(0.0);
                }
                let (a, b) = (0.5 * df1, 0.5 * df2);
                (a * (df1 / df2).ln() + (a - 1.0) * x.ln() - (a + b) * (df1 * x / df2).ln_1p() - ln_beta(a, b)).exp()
            }
            DistSpec::StudentizedRange { .. } => return None,
        };
        Some(v)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.validate()?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::param(format!("quantile probability must lie in (0, 1), got {p}")));
        }
        if matches!(self, DistSpec::Normal) && p == 0.5 {
            return Ok(0.0);
        }
        // Work in whichever tail is smaller, so p close to 1 keeps precision.
        let upper = p > 0.5;
        let target = if upper { 1.0 - p } else { p };
        // g(x) increases with x and crosses zero at the quantile
        let g = |x: f64| -> Result<f64> {
            let (lo, hi) = self.tails(x)?;
            Ok(if upper { target - hi } else { lo - target })
        };

        let (mut lo, mut hi) = self.bracket(&g)?;
        let is_sr = matches!(self, DistSpec::StudentizedRange { .. });
        if is_sr {
            return illinois(&g, lo, hi, STUDENTIZED_RANGE_QUANTILE_TOL).map_err(|detail| Error::Numeric {
                routine: "studentized range quantile",
                detail: format!("{self:?} p = {p}: {detail}"),
            });
        }
        let width_tol = 1e-4;
        let mut iter = 0;
        while hi - lo > width_tol * hi.abs().max(1.0) {
            let mid = 0.5 * (lo + hi);
            if g(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iter += 1;
            if iter > 400 {
                return Err(Error::Numeric {
                    routine: "quantile bisection",
                    detail: format!("{self:?} p = {p}: bracket [{lo}, {hi}] failed to shrink"),
                });
            }
        }
        let mut x = 0.5 * (lo + hi);

        // Newton polish, falling back to bisection whenever a step leaves the bracket.
        for _ in 0..100 {
            let gx = g(x)?;
            if gx == 0.0 {
                return Ok(x);
            }
            if gx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let dens = self.pdf(x).unwrap_or(0.0);
            let mut next = if dens > 0.0 { x - gx / dens } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-14 * x.abs().max(1e-300) || hi - lo <= 1e-15 * x.abs().max(1e-300) {
                return Ok(next);
            }
            x = next;
        }
        let gx = g(x)?;
        if gx.abs() <= 1e-10 {
            Ok(x)
        } else {
            Err(Error::Numeric {
                routine: "quantile newton",
                detail: format!("{self:?} p = {p}: residual {gx:e} at x = {x}"),
            })
        }
    }

    fn bracket<G: Fn(f64) -> Result<f64>>(&self, g: &G) -> Result<(f64, f64)> {
        let mut hi = 1.0;
        let mut steps = 0;
        while g(hi)? < 0.0 {
            hi *= 2.0;
            steps += 1;
            if steps > 1100 {
                return Err(Error::Numeric {
                    routine: "quantile bracket",
                    detail: format!("{self:?}: upper bound not found"),
                });
            }
        }
        let mut lo = if self.support_lower() == 0.0 { 0.0 } else { -1.0 };
        steps = 0;
        while lo < 0.0 && g(lo)? > 0.0 {
            lo *= 2.0;
            steps += 1;
            if steps > 1100 {
                return Err(Error::Numeric {
                    routine: "quantile bracket",
                    detail: format!("{self:?}: lower bound not found"),
                });
            }
        }
        if lo >= 0.0 {
            // positive support: tighten the lower end for tiny probabilities
            lo = 0.0;
        }
        Ok((lo, hi))
    }
}

/// Illinois regula falsi on a bracket with `g(lo) < 0 <= g(hi)`, stopping once the
/// bracket is narrower than `rel_tol` relative to its upper end.
fn illinois<G: Fn(f64) -> Result<f64>>(g: &G, lo: f64, hi: f64, rel_tol: f64) -> std::result::Result<f64, String> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (g(a).map_err(|e| e.to_string())?, g(b).map_err(|e| e.to_string())?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    // `a` keeps the endpoint that was retained last
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= rel_tol * a.abs().max(b.abs()).max(1.0) {
            return Ok(0.5 * (a + b));
        }
        let mut c = b - fb * (b - a) / (fb - fa);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let fc = g(c).map_err(|e| e.to_string())?;
        if fc == 0.0 {
            return Ok(c);
        }
        if (fc < 0.0) == (fb < 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = b;
            fa = fb;
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Err(format!("bracket [{a}, {b}] failed to shrink"))
}

pub fn cdf(spec: DistSpec, x: f64) -> Result<f64> {
    spec.cdf(x)
}

pub fn quantile(spec: DistSpec, p: f64) -> Result<f64> {
    spec.quantile(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_examples() {
        assert_eq!(DistSpec::Normal.cdf(0.0).unwrap(), 0.5);
        let c = DistSpec::ChiSquare { df: 2.0 }.cdf(2.0 * 2f64.ln()).unwrap();
        assert_relative_eq!(c, 0.5, epsilon = 1e-14);
        let t = DistSpec::StudentT { df: 1.0 }.cdf(1.0).unwrap();
        assert_relative_eq!(t, 0.75, epsilon = 1e-14);
        assert_eq!(DistSpec::Normal.quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn parameter_errors() {
        assert!(DistSpec::StudentT { df: 0.0 }.cdf(1.0).is_err());
        assert!(DistSpec::F { df1: 1.0, df2: -2.0 }.cdf(1.0).is_err());
        assert!(DistSpec::StudentizedRange { k: 1, df: 5.0 }.cdf(1.0).is_err());
        assert!(DistSpec::Normal.quantile(0.0).is_err());
        assert!(DistSpec::Normal.quantile(1.0).is_err());
        assert!(DistSpec::ChiSquare { df: 3.0 }.quantile(f64::NAN).is_err());
    }

    #[test]
    fn normal_quantiles() {
        assert_relative_eq!(DistSpec::Normal.quantile(0.975).unwrap(), 1.959_963_984_540_054, epsilon = 1e-12);
        assert_relative_eq!(DistSpec::Normal.quantile(0.025).unwrap(), -1.959_963_984_540_054, epsilon = 1e-12);
    }

    #[test]
    fn chi_square_one_df_is_squared_normal() {
        for &x in &[0.1, 1.0, 3.84, 10.0] {
            let c = DistSpec::ChiSquare { df: 1.0 }.cdf(x).unwrap();
            assert_relative_eq!(c, 2.0 * norm_cdf(x.sqrt()) - 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn studentized_range_two_groups_large_df() {
        let q = DistSpec::StudentizedRange { k: 2, df: 1e6 }.quantile(0.95).unwrap();
        let z = DistSpec::Normal.quantile(0.975).unwrap();
        assert!((q - std::f64::consts::SQRT_2 * z).abs() < 1e-3, "q = {q}");
    }

    #[test]
    fn studentized_range_textbook_value() {
        // q(0.95; 3, 10) is tabulated as 3.877
        let q = DistSpec::StudentizedRange { k: 3, df: 10.0 }.quantile(0.95).unwrap();
        assert!((q - 3.877).abs() < 2e-3, "q = {q}");
    }
}
