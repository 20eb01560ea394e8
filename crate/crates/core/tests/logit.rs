use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tattoo_stats::data::{synthesize, SynthConfig};
use tattoo_stats::featurize::{featurize_dataset, Feature, FeatureMode};
use tattoo_stats::logit::{fit_logit, fit_logit_rows, log_likelihood, predict_prob, score, LogitOptions};

fn sample(seed: u64, n: usize, beta: &[f64]) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let p = beta.len() - 1;
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.sample::<f64, _>(StandardNormal)).collect()).collect();
    let y = x
        .iter()
        .map(|row| {
            let eta = beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
            r.random::<f64>() < 1.0 / (1.0 + (-eta).exp())
        })
        .collect();
    (x, y)
}

#[test]
fn coefficients_within_three_standard_errors() {
    let beta = [-0.7, 1.0, -0.4, 0.0, 0.25];
    let (x, y) = sample(1, 5000, &beta);
    let fit = fit_logit(&x, &y, &LogitOptions::default()).unwrap();
    assert!(fit.converged, "{:?}", fit.warning);
    for j in 0..beta.len() {
        let z = (fit.coefficients[j] - beta[j]) / fit.standard_errors[j];
        assert!(z.abs() < 3.0, "coefficient {j}: z = {z}");
    }
}

#[test]
fn score_vanishes_at_the_mle() {
    let (x, y) = sample(2, 800, &[0.3, 0.5, -1.2]);
    let fit = fit_logit(&x, &y, &LogitOptions::default()).unwrap();
    let g = score(&x, &y, &fit.coefficients, true);
    assert!(g.iter().all(|v| v.abs() < 1e-6), "{g:?}");
}

#[test]
fn gradient_matches_finite_differences() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let (x, y) = sample(4, 400, &[0.1, 0.8, -0.6, 0.3]);
    for _ in 0..100 {
        let at: Vec<f64> = (0..4).map(|_| r.random_range(-2.0..2.0)).collect();
        let g = score(&x, &y, &at, true);
        for j in 0..at.len() {
            let h = 1e-5;
            let (mut up, mut dn) = (at.clone(), at.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (log_likelihood(&x, &y, &up, true) - log_likelihood(&x, &y, &dn, true)) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1.0), "j={j}: fd {fd} vs {}", g[j]);
        }
    }
}

#[test]
fn rescaling_a_feature_rescales_its_coefficient() {
    let (x, y) = sample(5, 1500, &[-0.2, 0.7, 0.4]);
    let c = 250.0;
    let scaled: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0] * c, r[1]]).collect();
    let a = fit_logit(&x, &y, &LogitOptions::default()).unwrap();
    let b = fit_logit(&scaled, &y, &LogitOptions::default()).unwrap();
    assert!((b.coefficients[1] * c - a.coefficients[1]).abs() < 1e-8);
    assert!((b.wald_z[1] - a.wald_z[1]).abs() < 1e-8);
    assert!((b.p_values[1] - a.p_values[1]).abs() < 1e-8);
}

#[test]
fn predictions_match_the_linear_predictor() {
    let (x, y) = sample(6, 500, &[0.0, 1.0]);
    let fit = fit_logit(&x, &y, &LogitOptions::default()).unwrap();
    for row in x.iter().take(20) {
        let eta = fit.coefficients[0] + fit.coefficients[1] * row[0];
        let p = predict_prob(&fit, row).unwrap();
        assert!((p - 1.0 / (1.0 + (-eta).exp())).abs() < 1e-12);
    }
    assert!(predict_prob(&fit, &[]).is_err());
}

#[test]
fn planted_synthetic_signs_are_recovered() {
    let config =
        SynthConfig { tattoos: 6000, patients: 1500, complication_tattoos: Some(600), ..SynthConfig::default() };
    let ds = synthesize(&config, 17).unwrap();
    let rows = featurize_dataset(&ds, FeatureMode::FirstArrival);
    let features = [Feature::MeanWavelength, Feature::SdSpot, Feature::MeanFluence, Feature::MeanDiffFrequency];
    let fit = fit_logit_rows(&rows, &features, &LogitOptions::default()).unwrap();
    let coef = |name: &str| fit.coefficients[fit.names.iter().position(|n| n == name).unwrap()];
    assert!(coef(Feature::MeanWavelength.key()) < 0.0);
    assert!(coef(Feature::SdSpot.key()) > 0.0);
}
