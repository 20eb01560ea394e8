//! Patient, tattoo and treatment records.
//!
//! Optional fields model values that were never recorded; analyses drop them
//! case-by-case rather than imputing.

mod export;
mod ingest;
pub mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use export::{export_dataset, write_patients, write_tattoos, write_treatments};
pub use ingest::{ingest, ingest_readers};
pub use synth::{synthesize, synthesize_documented, PlantedEffects, SynthConfig, SynthSummary};

use crate::{Error, Result};

pub const WAVELENGTHS_NM: [u32; 2] = [532, 1064];
pub const FREQUENCIES_HZ: [u32; 2] = [5, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Race {
    PacificIslander,
    AmericanAlaskanIndian,
    Black,
    Asian,
    LatinoHispanic,
    White,
    Multiracial,
    Other,
}

impl Race {
    pub const ALL: [Race; 8] = [
        Race::PacificIslander,
        Race::AmericanAlaskanIndian,
        Race::Black,
        Race::Asian,
        Race::LatinoHispanic,
        Race::White,
        Race::Multiracial,
        Race::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Race::PacificIslander => "pacific_islander",
            Race::AmericanAlaskanIndian => "american_alaskan_indian",
            Race::Black => "black",
            Race::Asian => "asian",
            Race::LatinoHispanic => "latino_hispanic",
            Race::White => "white",
            Race::Multiracial => "multiracial",
            Race::Other => "other",
        }
    }
}

impl fmt::Display for Race {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Race {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-', '/'], "_");
        Race::ALL.into_iter().find(|r| r.as_str() == norm).ok_or_else(|| Error::Input(format!("unknown race `{s}`")))
    }
}

/// Fitzpatrick skin type, I (fairest) through VI (deeply pigmented).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fitzpatrick(u8);

impl Fitzpatrick {
    pub fn new(level: u8) -> Result<Self> {
        if (1..=6).contains(&level) {
            Ok(Fitzpatrick(level))
        } else {
            Err(Error::Input(format!("Fitzpatrick score must be 1..=6, got {level}")))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }
}

impl FromStr for Fitzpatrick {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let level = match t.to_ascii_uppercase().as_str() {
            "I" => 1,
            "II" => 2,
            "III" => 3,
            "IV" => 4,
            "V" => 5,
            "VI" => 6,
            _ => t.parse::<u8>().map_err(|_| Error::Input(format!("unparseable Fitzpatrick score `{s}`")))?,
        };
        Fitzpatrick::new(level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub age: Option<u32>,
    pub sex_male: Option<bool>,
    pub hispanic: Option<bool>,
    pub race: Option<Race>,
    pub treatment_total: Option<u32>,
    pub total_tattoos: Option<u32>,
    pub fitzpatrick: Option<Fitzpatrick>,
    pub any_complication: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TattooRecord {
    pub tattoo_id: String,
    pub patient_id: String,
    /// Body location (face, neck, upper extremities, ...).
    pub body_category: Option<String>,
    pub tattoo_age: Option<u32>,
    /// True when the tattoo contains colors other than black/blue.
    pub colored: Option<bool>,
    pub professional: Option<bool>,
    pub treatment_total: Option<u32>,
    pub fitzpatrick: Option<Fitzpatrick>,
    pub any_complication: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentEvent {
    pub tattoo_id: String,
    /// Days since the tattoo's first treatment.
    pub day: u32,
    /// J/cm^2
    pub fluence: f64,
    /// mm
    pub spot_size: f64,
    /// nm, 532 or 1064
    pub wavelength: f64,
    /// Hz, 5 or 10
    pub frequency: f64,
    pub complication_observed: bool,
}

/// Laser setting recorded at each treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Fluence,
    SpotSize,
    Wavelength,
    Frequency,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::Fluence, Setting::SpotSize, Setting::Wavelength, Setting::Frequency];

    pub fn of(self, e: &TreatmentEvent) -> f64 {
        match self {
            Setting::Fluence => e.fluence,
            Setting::SpotSize => e.spot_size,
            Setting::Wavelength => e.wavelength,
            Setting::Frequency => e.frequency,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Setting::Fluence => "Fluence (J/cm^2)",
            Setting::SpotSize => "Spot size (mm)",
            Setting::Wavelength => "Wavelength (nm)",
            Setting::Frequency => "Frequency (Hz)",
        }
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "fluence" => Ok(Setting::Fluence),
            "spot_size" | "spot" => Ok(Setting::SpotSize),
            "wavelength" => Ok(Setting::Wavelength),
            "frequency" => Ok(Setting::Frequency),
            other => Err(Error::Input(format!("unknown treatment parameter `{other}`"))),
        }
    }
}

/// A tattoo's treatments ordered by day. Never empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSeries {
    tattoo_id: String,
    events: Vec<TreatmentEvent>,
}

impl TreatmentSeries {
    /// Sorts the events by day (stable) and rebases days so the first is 0.
    pub fn new(tattoo_id: impl Into<String>, mut events: Vec<TreatmentEvent>) -> Result<Self> {
        let tattoo_id = tattoo_id.into();
        if events.is_empty() {
            return Err(Error::InsufficientData(format!("tattoo {tattoo_id} has no treatments")));
        }
        if let Some(e) = events.iter().find(|e| e.tattoo_id != tattoo_id) {
            return Err(Error::Input(format!("event for {} placed in series {tattoo_id}", e.tattoo_id)));
        }
        events.sort_by_key(|e| e.day);
        let first = events[0].day;
        for e in &mut events {
            e.day -= first;
        }
        Ok(TreatmentSeries { tattoo_id, events })
    }

    pub fn tattoo_id(&self) -> &str {
        &self.tattoo_id
    }

    pub fn events(&self) -> &[TreatmentEvent] {
        &self.events
    }

    /// Number of treatments, N_t.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self, setting: Setting) -> Vec<f64> {
        self.events.iter().map(|e| setting.of(e)).collect()
    }

    pub fn days(&self) -> Vec<u32> {
        self.events.iter().map(|e| e.day).collect()
    }

    pub fn has_complication(&self) -> bool {
        self.events.iter().any(|e| e.complication_observed)
    }

    /// Prefix of the first `n` events (1 <= n <= len), used for truncation.
    pub(crate) fn prefix(&self, n: usize) -> TreatmentSeries {
        TreatmentSeries { tattoo_id: self.tattoo_id.clone(), events: self.events[..n].to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    DanglingReference,
    MissingKey,
    InvalidValue,
    DuplicateKey,
    DegenerateFeature,
}

/// A validation finding; the offending row is excluded, never silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub kind: IssueKind,
    pub file: String,
    /// 1-based data row (excluding the header) when the issue concerns a row.
    pub row: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub patients: Vec<PatientRecord>,
    pub tattoos: Vec<TattooRecord>,
    pub series: Vec<TreatmentSeries>,
    #[serde(default)]
    pub issues: Vec<Issue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCounts {
    pub patients: usize,
    pub tattoos: usize,
    pub series: usize,
    pub treatments: usize,
    pub issues: usize,
}

impl Dataset {
    pub fn row_counts(&self) -> RowCounts {
        RowCounts {
            patients: self.patients.len(),
            tattoos: self.tattoos.len(),
            series: self.series.len(),
            treatments: self.series.iter().map(|s| s.len()).sum(),
            issues: self.issues.len(),
        }
    }

    pub fn series_for(&self, tattoo_id: &str) -> Option<&TreatmentSeries> {
        self.series.iter().find(|s| s.tattoo_id == tattoo_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(day: u32, f: f64) -> TreatmentEvent {
        TreatmentEvent {
            tattoo_id: "t".into(),
            day,
            fluence: f,
            spot_size: 4.0,
            wavelength: 1064.0,
            frequency: 10.0,
            complication_observed: false,
        }
    }

    #[test]
    fn series_sorted_and_rebased() {
        let s = TreatmentSeries::new("t", vec![ev(90, 3.0), ev(30, 1.0), ev(60, 2.0)]).unwrap();
        assert_eq!(s.days(), vec![0, 30, 60]);
        assert_eq!(s.values(Setting::Fluence), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn empty_series_rejected() {
        assert!(TreatmentSeries::new("t", vec![]).is_err());
    }

    #[test]
    fn parse_enums() {
        assert_eq!("IV".parse::<Fitzpatrick>().unwrap().level(), 4);
        assert_eq!("6".parse::<Fitzpatrick>().unwrap().level(), 6);
        assert!("7".parse::<Fitzpatrick>().is_err());
        assert_eq!("Pacific Islander".parse::<Race>().unwrap(), Race::PacificIslander);
        assert_eq!("spot-size".parse::<Setting>().unwrap(), Setting::SpotSize);
    }
}
