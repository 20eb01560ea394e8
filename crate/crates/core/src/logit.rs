//! Binary logistic regression by maximum likelihood with Wald inference.
//!
//! The model is `P(Y = 1 | x) = 1 / (1 + exp(-(b0 + b·x)))`. Fitting runs Newton
//! iterations with step-halving on internally standardized columns; coefficients
//! and their covariance are mapped back to the caller's units before returning.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::two_sided_normal_p;
use crate::featurize::{Feature, FeatureRow};
use crate::{Error, Result};

/// Standardized coefficients beyond this magnitude are treated as diverging.
const SEPARATION_BOUND: f64 = 25.0;
const LL_NOISE: f64 = 1e-12;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitOptions {
    pub max_iter: usize,
    /// Tolerance on the max-norm of the score in standardized coordinates.
    pub tol: f64,
    pub intercept: bool,
}

impl Default for LogitOptions {
    fn default() -> Self {
        LogitOptions { max_iter: 100, tol: 1e-8, intercept: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitFit {
    /// Term names in coefficient order; the intercept, if any, is `"(Intercept)"`.
    pub names: Vec<String>,
    pub intercept: bool,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub wald_z: Vec<f64>,
    pub p_values: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_log_likelihood: f64,
    /// Set when the fit did not converge, e.g. under (quasi-)separation.
    pub warning: Option<String>,
}

pub const INTERCEPT_NAME: &str = "(Intercept)";

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(eta)) without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn design_row(x: &[f64], intercept: bool) -> impl Iterator<Item = f64> + '_ {
    intercept.then_some(1.0).into_iter().chain(x.iter().copied())
}

fn linear_predictor(x: &[f64], beta: &[f64], intercept: bool) -> f64 {
    design_row(x, intercept).zip(beta).map(|(a, b)| a * b).sum()
}

/// Bernoulli log-likelihood of `beta` (intercept first when `intercept`).
pub fn log_likelihood(x: &[Vec<f64>], y: &[bool], beta: &[f64], intercept: bool) -> f64 {
    x.iter()
        .zip(y)
        .map(|(row, &yi)| {
            let eta = linear_predictor(row, beta, intercept);
            if yi {
                eta - softplus(eta)
            } else {
                -softplus(eta)
            }
        })
        .sum()
}

/// Analytic gradient of [`log_likelihood`]: `X^T (y - p)`.
pub fn score(x: &[Vec<f64>], y: &[bool], beta: &[f64], intercept: bool) -> Vec<f64> {
    let mut g = vec![0.0; beta.len()];
    for (row, &yi) in x.iter().zip(y) {
        let r = f64::from(u8::from(yi)) - sigmoid(linear_predictor(row, beta, intercept));
        for (gj, xj) in g.iter_mut().zip(design_row(row, intercept)) {
            *gj += xj * r;
        }
    }
    g
}

struct Standardized {
    z: Vec<Vec<f64>>,
    center: Vec<f64>,
    scale: Vec<f64>,
}

fn standardize(x: &[Vec<f64>], p: usize, intercept: bool) -> Result<Standardized> {
    let n = x.len() as f64;
    let mut center = vec![0.0; p];
    let mut scale = vec![1.0; p];
    for j in 0..p {
        let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
        let (c, s2) = if intercept {
            (m, x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n)
        } else {
            (0.0, x.iter().map(|r| r[j] * r[j]).sum::<f64>() / n)
        };
        if !(s2 > 0.0) {
            return Err(Error::Degenerate(format!("column {j} is constant")));
        }
        center[j] = c;
        scale[j] = s2.sqrt();
    }
    let z = x.iter().map(|r| r.iter().enumerate().map(|(j, v)| (v - center[j]) / scale[j]).collect()).collect();
    Ok(Standardized { z, center, scale })
}

fn information(z: &[Vec<f64>], beta: &[f64], intercept: bool) -> DMatrix<f64> {
    let k = beta.len();
    let mut info = DMatrix::zeros(k, k);
    let mut d = vec![0.0; k];
    for row in z {
        let p = sigmoid(linear_predictor(row, beta, intercept));
        let w = p * (1.0 - p);
        for (dj, v) in d.iter_mut().zip(design_row(row, intercept)) {
            *dj = v;
        }
        for a in 0..k {
            let wa = w * d[a];
            for b in a..k {
                info[(a, b)] += wa * d[b];
            }
        }
    }
    info.fill_lower_triangle_with_upper_triangle();
    info
}

/// Fits a logistic regression on the rows of `x` (one `Vec` per observation).
///
/// Non-convergence, including divergence under separation, is reported through
/// `converged = false` and `warning` rather than an error.
pub fn fit_logit(x: &[Vec<f64>], y: &[bool], options: &LogitOptions) -> Result<LogitFit> {
    let p = x.first().map_or(0, Vec::len);
    fit_named(x, y, (0..p).map(|j| format!("x{}", j + 1)).collect(), options)
}

/// Fits on the complete rows of `rows` over `features`; incomplete rows are skipped.
pub fn fit_logit_rows(rows: &[FeatureRow], features: &[Feature], options: &LogitOptions) -> Result<LogitFit> {
    if features.is_empty() {
        return Err(Error::param("at least one feature is required"));
    }
    let (x, y): (Vec<_>, Vec<_>) = rows.iter().filter_map(|r| r.complete(features).map(|v| (v, r.label))).unzip();
    fit_named(&x, &y, features.iter().map(|f| f.key().to_string()).collect(), options)
}

fn fit_named(x: &[Vec<f64>], y: &[bool], names: Vec<String>, options: &LogitOptions) -> Result<LogitFit> {
    if x.len() != y.len() {
        return Err(Error::param(format!("{} rows but {} labels", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let p = names.len();
    if !options.intercept && p == 0 {
        return Err(Error::param("model has no terms"));
    }
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::param("rows have inconsistent lengths"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite feature value".into()));
    }
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::param("tol must be positive and max_iter nonzero"));
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::Degenerate("only one class present in the labels".into()));
    }

    let intercept = options.intercept;
    let std = standardize(x, p, intercept)?;
    let k = p + usize::from(intercept);
    let mut beta = vec![0.0; k];
    if intercept {
        let rate = positives as f64 / y.len() as f64;
        beta[0] = (rate / (1.0 - rate)).ln();
    }

    let mut ll = log_likelihood(&std.z, y, &beta, intercept);
    let mut converged = false;
    let mut iterations = 0;
    let mut warning = None;
    loop {
        let g = score(&std.z, y, &beta, intercept);
        if g.iter().all(|v| v.abs() < options.tol) {
            converged = true;
            break;
        }
        if iterations == options.max_iter {
            warning = Some(format!("no convergence after {iterations} Newton iterations"));
            break;
        }
        iterations += 1;
        let info = information(&std.z, &beta, intercept);
        let Some(step) = info.cholesky().map(|c| c.solve(&DVector::from_vec(g.clone()))) else {
            warning = Some("information matrix is singular".into());
            break;
        };
        let gain: f64 = g.iter().zip(step.iter()).map(|(a, b)| a * b).sum::<f64>() / 2.0;
        let in_noise = gain <= LL_NOISE * (1.0 + ll.abs());
        let g_max = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
            let cand_ll = log_likelihood(&std.z, y, &cand, intercept);
            // below the rounding floor of the likelihood sum, judge the step by the gradient instead
            let shrinks = in_noise && t == 1.0 && score(&std.z, y, &cand, intercept).iter().all(|v| v.abs() < g_max);
            if cand_ll >= ll || shrinks {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            warning = Some("line search failed to increase the likelihood".into());
            break;
        }
        if beta.iter().skip(usize::from(intercept)).any(|b| b.abs() > SEPARATION_BOUND) {
            warning = Some("coefficients diverging; the classes appear (quasi-)separated".into());
            break;
        }
    }
    if converged && beta.iter().skip(usize::from(intercept)).any(|b| b.abs() > SEPARATION_BOUND) {
        converged = false;
        warning = Some("coefficients diverging; the classes appear (quasi-)separated".into());
    }

    // map back to the original units: beta = A beta_std
    let mut a = DMatrix::zeros(k, k);
    let off = usize::from(intercept);
    if intercept {
        a[(0, 0)] = 1.0;
    }
    for j in 0..p {
        a[(off + j, off + j)] = 1.0 / std.scale[j];
        if intercept {
            a[(0, off + j)] = -std.center[j] / std.scale[j];
        }
    }
    let coef = &a * DVector::from_vec(beta.clone());
    let info = information(&std.z, &beta, intercept);
    let cov_std = info.clone().try_inverse();
    let se: Vec<f64> = match cov_std {
        Some(c) => {
            let cov = &a * c * a.transpose();
            (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect()
        }
        None => {
            converged = false;
            warning.get_or_insert_with(|| "information matrix is singular".into());
            vec![f64::NAN; k]
        }
    };
    let coefficients: Vec<f64> = coef.iter().copied().collect();
    let wald_z: Vec<f64> = coefficients.iter().zip(&se).map(|(b, s)| b / s).collect();
    let p_values = wald_z.iter().map(|&z| if z.is_finite() { two_sided_normal_p(z) } else { f64::NAN }).collect();
    let mut all_names = Vec::with_capacity(k);
    if intercept {
        all_names.push(INTERCEPT_NAME.to_string());
    }
    all_names.extend(names);
    Ok(LogitFit {
        names: all_names,
        intercept,
        coefficients,
        standard_errors: se,
        wald_z,
        p_values,
        converged,
        iterations,
        final_log_likelihood: ll,
        warning,
    })
}

impl LogitFit {
    /// Term names without the intercept.
    pub fn feature_names(&self) -> &[String] {
        &self.names[usize::from(self.intercept)..]
    }
}

/// Fitted probability for a feature vector in the order of `fit.feature_names()`.
pub fn predict_prob(fit: &LogitFit, x: &[f64]) -> Result<f64> {
    let p = fit.feature_names().len();
    if x.len() != p {
        return Err(Error::Input(format!("expected {p} feature values, got {}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite feature value".into()));
    }
    Ok(sigmoid(linear_predictor(x, &fit.coefficients, fit.intercept)))
}

/// Fitted probability for a featurized tattoo; every modelled feature must be present.
pub fn predict_row(fit: &LogitFit, row: &FeatureRow) -> Result<f64> {
    let x = fit
        .feature_names()
        .iter()
        .map(|name| {
            let f: Feature = name.parse()?;
            row.get(f).ok_or_else(|| Error::Input(format!("row {} lacks `{name}`", row.tattoo_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    predict_prob(fit, &x)
}
