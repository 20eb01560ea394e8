//! Seeded synthetic cohort with a planted logistic complication model.
//!
//! Generative story, per tattoo:
//!
//! 1. attributes (location, age, colors, professional) and the owning patient;
//! 2. a pre-complication treatment series: fluence ramps linearly from a base
//!    that depends on location and tattoo age, with per-visit jitter shared by
//!    fluence and spot size; wavelength and frequency switch between their two
//!    levels with tattoo-specific probabilities;
//! 3. the complication label is drawn from a logistic model on the series'
//!    summary features plus the colored/professional flags. When an exact
//!    complication count is requested, labels are drawn from that model
//!    conditioned on the total (intercept calibrated, then rejection);
//! 4. a complication is recorded at the last pre-complication visit, followed by
//!    a Poisson number of follow-up visits.
//!
//! Summary features of the first-arrival series are therefore exactly the
//! covariates of the planted model.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{Dataset, Fitzpatrick, PatientRecord, Race, TattooRecord, TreatmentEvent, TreatmentSeries};
use crate::featurize::{summarize, Feature};
use crate::{Error, Result};

pub const BODY_CATEGORIES: [(&str, f64); 8] = [
    ("face", 0.14),
    ("neck", 0.16),
    ("upper_extremities", 0.26),
    ("lower_extremities", 0.10),
    ("back", 0.10),
    ("chest", 0.10),
    ("head", 0.07),
    ("abdomen", 0.07),
];

const MAX_REJECTION_ROUNDS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedEffects {
    /// Log-odds per unit of each summary feature (keys are feature column names).
    pub features: BTreeMap<Feature, f64>,
    pub colored: f64,
    pub professional: f64,
    /// Used only when no exact complication count is requested.
    pub intercept: f64,
    /// Additive fluence shift (J/cm^2) by body location.
    pub location_fluence: BTreeMap<String, f64>,
    /// Base fluence increase per year of tattoo age.
    pub fluence_per_tattoo_year: f64,
}

impl Default for PlantedEffects {
    fn default() -> Self {
        PlantedEffects {
            features: BTreeMap::from([
                (Feature::MeanWavelength, -0.004),
                (Feature::SdSpot, 1.3),
                (Feature::MeanDiffFrequency, 0.45),
                (Feature::MeanFluence, 0.5),
            ]),
            colored: 0.8,
            professional: 0.7,
            intercept: 0.0,
            location_fluence: BTreeMap::from([("face".to_string(), -0.12), ("upper_extremities".to_string(), 0.1)]),
            fluence_per_tattoo_year: 0.012,
        }
    }
}

impl PlantedEffects {
    /// No association between anything and the complication label, and no
    /// location or age structure in fluence.
    pub fn null() -> Self {
        PlantedEffects {
            features: BTreeMap::new(),
            colored: 0.0,
            professional: 0.0,
            intercept: 0.0,
            location_fluence: BTreeMap::new(),
            fluence_per_tattoo_year: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub patients: usize,
    pub tattoos: usize,
    /// Exact number of complication tattoos; `None` draws labels unconditionally.
    pub complication_tattoos: Option<usize>,
    /// Mean length of the pre-complication series.
    pub mean_treatments: f64,
    pub max_treatments: usize,
    pub mean_gap_days: f64,
    /// Mean number of visits recorded after a complication.
    pub followup_visits: f64,
    /// Probability that each optional demographic / tattoo field is left blank.
    pub missing_rate: f64,
    pub effects: PlantedEffects,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            patients: 502,
            tattoos: 2118,
            complication_tattoos: Some(118),
            mean_treatments: 7.0,
            max_treatments: 30,
            mean_gap_days: 95.0,
            followup_visits: 1.0,
            missing_rate: 0.02,
            effects: PlantedEffects::default(),
        }
    }
}

/// What was actually planted, for the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub seed: u64,
    pub label_model: String,
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
    pub complication_tattoos: usize,
    pub rejection_rounds: usize,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tattoos == 0 {
            return Ok(());
        }
        if self.patients == 0 || self.patients > self.tattoos {
            return Err(Error::param(format!(
                "need 1 <= patients <= tattoos (every patient has a tattoo); got {} patients, {} tattoos",
                self.patients, self.tattoos
            )));
        }
        if let Some(k) = self.complication_tattoos {
            if k > self.tattoos {
                return Err(Error::param(format!("{k} complication tattoos requested among {} tattoos", self.tattoos)));
            }
        }
        if !(self.mean_treatments >= 1.0) || self.max_treatments == 0 {
            return Err(Error::param("mean_treatments must be >= 1 and max_treatments >= 1"));
        }
        if !(self.mean_gap_days > 1.0) || !(self.followup_visits >= 0.0) || !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::param("mean_gap_days > 1, followup_visits >= 0, missing_rate in [0, 1) required"));
        }
        Ok(())
    }
}

struct Latent {
    colored: bool,
    professional: bool,
    series: Vec<TreatmentEvent>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn maybe<T>(rng: &mut ChaCha8Rng, rate: f64, v: T) -> Option<T> {
    if rate > 0.0 && rng.random::<f64>() < rate {
        None
    } else {
        Some(v)
    }
}

fn pick_category(rng: &mut ChaCha8Rng) -> &'static str {
    let u: f64 = rng.random::<f64>() * BODY_CATEGORIES.iter().map(|c| c.1).sum::<f64>();
    let mut acc = 0.0;
    for (name, w) in BODY_CATEGORIES {
        acc += w;
        if u < acc {
            return name;
        }
    }
    BODY_CATEGORIES[BODY_CATEGORIES.len() - 1].0
}

/// Visit settings along a tattoo's series; `visit` counts from 0 and may run past
/// the pre-complication portion for follow-up visits.
struct SeriesPlan {
    base_fluence: f64,
    ramp: f64,
    jitter: f64,
    base_spot: f64,
    spot_drift: f64,
    p_1064: f64,
    p_10hz: f64,
}

impl SeriesPlan {
    /// Probability that the frequency setting is re-drawn at a follow-up visit.
    fn switch_rate(&self) -> f64 {
        0.4 + 0.6 * (self.jitter / 0.6).min(1.0)
    }

    fn event(
        &self,
        rng: &mut ChaCha8Rng,
        tattoo_id: &str,
        visit: usize,
        day: u32,
        last_hz: Option<f64>,
    ) -> TreatmentEvent {
        let z = Normal::new(0.0, 1.0).expect("unit normal");
        let k = visit as f64;
        let fluence = (self.base_fluence + self.ramp * k + self.jitter * z.sample(rng)).max(0.2);
        let spot = (self.base_spot + self.spot_drift * k + 1.6 * self.jitter * z.sample(rng)).clamp(1.5, 10.0);
        let wavelength = if rng.random::<f64>() < self.p_1064 { 1064.0 } else { 532.0 };
        let redraw = rng.random::<f64>() < self.switch_rate();
        let fresh = if rng.random::<f64>() < self.p_10hz { 10.0 } else { 5.0 };
        let frequency = match last_hz {
            Some(hz) if !redraw => hz,
            _ => fresh,
        };
        TreatmentEvent {
            tattoo_id: tattoo_id.to_string(),
            day,
            fluence: (fluence * 1000.0).round() / 1000.0,
            spot_size: (spot * 100.0).round() / 100.0,
            wavelength,
            frequency,
            complication_observed: false,
        }
    }
}

/// Generates a dataset from `config`; a pure function of `(config, seed)`.
pub fn synthesize(config: &SynthConfig, seed: u64) -> Result<Dataset> {
    synthesize_documented(config, seed).map(|(d, _)| d)
}

/// As [`synthesize`], also returning the planted model actually used.
pub fn synthesize_documented(config: &SynthConfig, seed: u64) -> Result<(Dataset, SynthSummary)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eff = &config.effects;
    let n = config.tattoos;
    let mut summary = SynthSummary {
        seed,
        label_model: "logit P(complication) = intercept + sum_f beta_f * feature_f(first-arrival series) \
                      + beta_colored * colored + beta_professional * professional"
            .into(),
        intercept: eff.intercept,
        coefficients: eff.features.iter().map(|(f, b)| (f.key().to_string(), *b)).collect(),
        complication_tattoos: 0,
        rejection_rounds: 0,
    };
    summary.coefficients.insert("colored".into(), eff.colored);
    summary.coefficients.insert("professional".into(), eff.professional);
    if n == 0 {
        return Ok((Dataset::default(), summary));
    }

    // patients: every patient owns at least one tattoo
    let mut owner: Vec<usize> = (0..config.patients).collect();
    owner.extend((config.patients..n).map(|_| rng.random_range(0..config.patients)));
    owner.sort_unstable();

    let race_weights = [0.01, 0.01, 0.05, 0.01, 0.70, 0.12, 0.06, 0.04];
    let mut patients = Vec::with_capacity(config.patients);
    for i in 0..config.patients {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut race = Race::Other;
        for (r, w) in Race::ALL.iter().zip(race_weights) {
            acc += w;
            if u < acc {
                race = *r;
                break;
            }
        }
        let age = (18.0 + Exp::new(1.0 / 17.0_f64).expect("rate").sample(&mut rng)).min(80.0) as u32;
        let fitz = Fitzpatrick::new(rng.random_range(2..=5)).expect("level in range");
        let sex = rng.random::<f64>() < 0.8;
        let hisp = rng.random::<f64>() < 0.75;
        let r = config.missing_rate;
        patients.push(PatientRecord {
            patient_id: format!("P{:05}", i + 1),
            age: maybe(&mut rng, r, age),
            sex_male: maybe(&mut rng, r, sex),
            hispanic: maybe(&mut rng, r, hisp),
            race: maybe(&mut rng, r, race),
            treatment_total: None,
            total_tattoos: None,
            fitzpatrick: maybe(&mut rng, r, fitz),
            any_complication: None,
        });
    }

    let visits = Poisson::new(config.mean_treatments - 1.0 + f64::EPSILON).expect("positive mean");
    let gap = Exp::new(1.0 / (config.mean_gap_days - 27.0).max(1.0)).expect("rate");
    let jitter = LogNormal::new((0.22f64).ln(), 0.95).expect("lognormal");
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut tattoos = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    for (i, &p) in owner.iter().enumerate() {
        let tattoo_id = format!("T{:06}", i + 1);
        let category = pick_category(&mut rng);
        let age = (Exp::new(1.0 / 9.0_f64).expect("rate").sample(&mut rng) as u32).min(40);
        let colored = rng.random::<f64>() < 0.18;
        let professional = rng.random::<f64>() < 0.45;

        let shift = eff.location_fluence.get(category).copied().unwrap_or(0.0);
        let plan = SeriesPlan {
            base_fluence: (1.45 + shift + eff.fluence_per_tattoo_year * age as f64 + 0.35 * unit.sample(&mut rng))
                .max(0.4),
            ramp: 0.12 + 0.07 * unit.sample(&mut rng),
            jitter: jitter.sample(&mut rng).min(1.2),
            base_spot: 4.95 + 0.35 * unit.sample(&mut rng),
            spot_drift: -0.06 + 0.04 * unit.sample(&mut rng),
            p_1064: if colored { rng.random_range(0.35..0.9) } else { rng.random_range(0.8..1.0) },
            p_10hz: if rng.random::<f64>() < 0.45 { 1.0 } else { rng.random_range(0.5..0.9) },
        };
        let len = (1 + visits.sample(&mut rng) as usize).min(config.max_treatments);
        let mut day = 0u32;
        let mut events = Vec::with_capacity(len + 2);
        for v in 0..len {
            if v > 0 {
                day += 27 + gap.sample(&mut rng) as u32;
            }
            let last_hz = events.last().map(|e: &TreatmentEvent| e.frequency);
            events.push(plan.event(&mut rng, &tattoo_id, v, day, last_hz));
        }
        let r = config.missing_rate;
        tattoos.push(TattooRecord {
            tattoo_id: tattoo_id.clone(),
            patient_id: patients[p].patient_id.clone(),
            body_category: maybe(&mut rng, r, category.to_string()),
            tattoo_age: maybe(&mut rng, r, age),
            colored: maybe(&mut rng, r, colored),
            professional: maybe(&mut rng, r, professional),
            treatment_total: None,
            fitzpatrick: patients[p].fitzpatrick,
            any_complication: None,
        });
        latent.push((Latent { colored, professional, series: events }, plan));
    }

    // linear predictor without intercept
    let eta: Vec<f64> = latent
        .iter()
        .map(|(l, _)| {
            let s = TreatmentSeries::new(l.series[0].tattoo_id.clone(), l.series.clone()).expect("non-empty series");
            let row = summarize(&s);
            let mut e =
                eff.colored * f64::from(u8::from(l.colored)) + eff.professional * f64::from(u8::from(l.professional));
            for (f, b) in &eff.features {
                e += b * row.get(*f).unwrap_or(0.0);
            }
            e
        })
        .collect();

    let labels: Vec<bool> = match config.complication_tattoos {
        None => eta.iter().map(|e| rng.random::<f64>() < sigmoid(eff.intercept + e)).collect(),
        Some(k) => {
            let b0 = calibrate_intercept(&eta, k);
            summary.intercept = b0;
            if k == 0 || k == n {
                vec![k == n; n]
            } else {
                let probs: Vec<f64> = eta.iter().map(|e| sigmoid(b0 + e)).collect();
                let mut rounds = 0;
                loop {
                    rounds += 1;
                    let draw: Vec<bool> = probs.iter().map(|&p| rng.random::<f64>() < p).collect();
                    if draw.iter().filter(|&&d| d).count() == k {
                        summary.rejection_rounds = rounds;
                        break draw;
                    }
                    if rounds >= MAX_REJECTION_ROUNDS {
                        return Err(Error::Numeric {
                            routine: "synthesize",
                            detail: format!("could not hit exactly {k} complications after {rounds} draws"),
                        });
                    }
                }
            }
        }
    };
    summary.complication_tattoos = labels.iter().filter(|&&l| l).count();

    let followup = Poisson::new(config.followup_visits.max(1e-12)).expect("positive mean");
    let mut series = Vec::with_capacity(n);
    for ((mut l, plan), &label) in latent.into_iter().zip(&labels) {
        if label {
            let last = l.series.len() - 1;
            l.series[last].complication_observed = true;
            let extra = if config.followup_visits > 0.0 { followup.sample(&mut rng) as usize } else { 0 };
            let mut day = l.series[last].day;
            for v in 0..extra {
                day += 27 + gap.sample(&mut rng) as u32;
                let last_hz = l.series.last().map(|e| e.frequency);
                let e = plan.event(&mut rng, &l.series[0].tattoo_id, last + 1 + v, day, last_hz);
                l.series.push(e);
            }
        }
        let id = l.series[0].tattoo_id.clone();
        series.push(TreatmentSeries::new(id, l.series)?);
    }

    for ((t, s), &label) in tattoos.iter_mut().zip(&series).zip(&labels) {
        t.treatment_total = Some(s.len() as u32);
        t.any_complication = Some(label);
    }
    for (t, &p) in tattoos.iter().zip(&owner) {
        let pr = &mut patients[p];
        pr.total_tattoos = Some(pr.total_tattoos.unwrap_or(0) + 1);
        pr.treatment_total = Some(pr.treatment_total.unwrap_or(0) + t.treatment_total.unwrap_or(0));
        pr.any_complication = Some(pr.any_complication.unwrap_or(false) || t.any_complication == Some(true));
    }

    Ok((Dataset { patients, tattoos, series, issues: Vec::new() }, summary))
}

/// Intercept b with sum_i sigmoid(b + eta_i) = k.
fn calibrate_intercept(eta: &[f64], k: usize) -> f64 {
    if k == 0 || k == eta.len() {
        return 0.0;
    }
    let target = k as f64;
    let expected = |b: f64| eta.iter().map(|e| sigmoid(b + e)).sum::<f64>();
    let (mut lo, mut hi) = (-50.0, 50.0);
    let (emin, emax) =
        eta.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b): (f64, f64), &e| (a.min(e), b.max(e)));
    lo -= emax;
    hi -= emin;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig { patients: 40, tattoos: 150, complication_tattoos: Some(20), ..SynthConfig::default() }
    }

    #[test]
    fn counts_are_exact() {
        let ds = synthesize(&small(), 3).unwrap();
        assert_eq!(ds.patients.len(), 40);
        assert_eq!(ds.tattoos.len(), 150);
        assert_eq!(ds.series.len(), 150);
        assert_eq!(ds.tattoos.iter().filter(|t| t.any_complication == Some(true)).count(), 20);
        assert_eq!(ds.series.iter().filter(|s| s.has_complication()).count(), 20);
        let total: u32 = ds.patients.iter().map(|p| p.total_tattoos.unwrap()).sum();
        assert_eq!(total, 150);
    }

    #[test]
    fn zero_tattoos_is_empty() {
        let cfg = SynthConfig { tattoos: 0, ..SynthConfig::default() };
        assert_eq!(synthesize(&cfg, 1).unwrap(), Dataset::default());
    }

    #[test]
    fn inconsistent_config_rejected() {
        let cfg = SynthConfig { complication_tattoos: Some(200), ..small() };
        assert!(matches!(synthesize(&cfg, 1), Err(Error::Parameter(_))));
        let cfg = SynthConfig { patients: 151, ..small() };
        assert!(synthesize(&cfg, 1).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        assert_eq!(synthesize(&small(), 9).unwrap(), synthesize(&small(), 9).unwrap());
        assert_ne!(synthesize(&small(), 9).unwrap(), synthesize(&small(), 10).unwrap());
    }

    #[test]
    fn calibration_hits_target() {
        let eta: Vec<f64> = (0..100).map(|i| i as f64 / 50.0).collect();
        let b = calibrate_intercept(&eta, 10);
        let s: f64 = eta.iter().map(|e| sigmoid(b + e)).sum();
        assert!((s - 10.0).abs() < 1e-9);
    }
}
