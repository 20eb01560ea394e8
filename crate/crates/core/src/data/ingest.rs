use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use csv::StringRecord;

use super::{
    Dataset, Fitzpatrick, Issue, IssueKind, PatientRecord, Race, TattooRecord, TreatmentEvent, TreatmentSeries,
    FREQUENCIES_HZ, WAVELENGTHS_NM,
};
use crate::{Error, Result};

pub(crate) const PATIENT_COLUMNS: [&str; 9] = [
    "patient_id",
    "age",
    "sex",
    "ethnicity",
    "race",
    "treatment_total",
    "total_tattoos",
    "fitzpatrick",
    "complications",
];
pub(crate) const TATTOO_COLUMNS: [&str; 9] = [
    "tattoo_id",
    "patient_id",
    "category",
    "tattoo_age",
    "colors",
    "professional",
    "treatment_total",
    "fitzpatrick",
    "complications",
];
pub(crate) const TREATMENT_COLUMNS: [&str; 7] =
    ["tattoo_id", "day", "fluence_j_cm2", "spot_size_mm", "wavelength_nm", "frequency_hz", "complication"];

/// Reads the three CSV tables from disk. See [`ingest_readers`].
pub fn ingest(patients: &Path, tattoos: &Path, treatments: &Path) -> Result<Dataset> {
    let open = |p: &Path| File::open(p).map_err(|e| Error::io(p, e));
    ingest_readers(open(patients)?, open(tattoos)?, open(treatments)?)
}

/// Column positions resolved from a header row.
struct Columns {
    file: &'static str,
    idx: Vec<usize>,
}

impl Columns {
    fn resolve(file: &'static str, header: &StringRecord, wanted: &[&str]) -> Result<Self> {
        let names: Vec<String> =
            header.iter().map(|h| h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase()).collect();
        let idx = wanted
            .iter()
            .map(|w| {
                names
                    .iter()
                    .position(|n| n == w)
                    .ok_or_else(|| Error::Schema { file: file.to_string(), detail: format!("missing column `{w}`") })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Columns { file, idx })
    }

    fn get<'r>(&self, rec: &'r StringRecord, col: usize) -> &'r str {
        rec.get(self.idx[col]).map(str::trim).unwrap_or("")
    }
}

/// Parses one row's cells, collecting per-field problems instead of failing fast.
struct RowParser<'a> {
    cols: &'a Columns,
    rec: &'a StringRecord,
    row: usize,
    issues: Vec<Issue>,
}

impl<'a> RowParser<'a> {
    fn new(cols: &'a Columns, rec: &'a StringRecord, row: usize) -> Self {
        RowParser { cols, rec, row, issues: Vec::new() }
    }

    fn raw(&self, col: usize) -> &'a str {
        self.cols.get(self.rec, col)
    }

    fn issue(&mut self, kind: IssueKind, message: String) {
        self.issues.push(Issue { kind, file: self.cols.file.to_string(), row: Some(self.row), message });
    }

    /// Empty cell -> None; bad cell -> issue + None.
    fn opt<T>(&mut self, col: usize, name: &str, parse: impl Fn(&str) -> Option<T>) -> Option<T> {
        let s = self.raw(col);
        if s.is_empty() {
            return None;
        }
        match parse(s) {
            Some(v) => Some(v),
            None => {
                self.issue(IssueKind::InvalidValue, format!("{name}: cannot parse `{s}`; treated as missing"));
                None
            }
        }
    }

    /// Required cell; a missing or bad value marks the row as rejected.
    fn req<T>(&mut self, col: usize, name: &str, parse: impl Fn(&str) -> Option<T>) -> Option<T> {
        let s = self.raw(col);
        if s.is_empty() {
            self.issue(IssueKind::MissingKey, format!("required field {name} is empty; row excluded"));
            return None;
        }
        let v = parse(s);
        if v.is_none() {
            self.issue(IssueKind::InvalidValue, format!("{name}: cannot parse `{s}`; row excluded"));
        }
        v
    }
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" | "t" => Some(true),
        "0" | "false" | "no" | "n" | "f" => Some(false),
        _ => None,
    }
}

fn parse_sex(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "m" | "male" => Some(true),
        "f" | "female" => Some(false),
        _ => parse_flag(s),
    }
}

fn parse_hispanic(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().replace(['-', ' ', '/'], "_").as_str() {
        "hispanic" | "latino" | "hispanic_latino" | "latino_hispanic" => Some(true),
        "not_hispanic" | "non_hispanic" | "not_hispanic_latino" => Some(false),
        _ => parse_flag(s),
    }
}

fn parse_colors(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().replace(['-', ' ', '/'], "_").as_str() {
        "colored" | "color" => Some(true),
        "black_blue" | "black" | "blue" => Some(false),
        _ => parse_flag(s),
    }
}

fn parse_count(s: &str) -> Option<u32> {
    s.parse::<u32>().ok()
}

fn parse_positive(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite() && *v > 0.0)
}

fn parse_level(levels: &'static [u32]) -> impl Fn(&str) -> Option<f64> {
    move |s| {
        let v = s.parse::<f64>().ok()?;
        levels.iter().any(|&l| l as f64 == v).then_some(v)
    }
}

/// Integer day offset or a calendar date (days are rebased per tattoo later).
fn parse_day(s: &str) -> Option<i64> {
    if let Ok(d) = s.parse::<i64>() {
        return (d >= 0).then_some(d);
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().map(|d| i64::from(d.num_days_from_ce()))
}

use chrono::Datelike;

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(r)
}

/// Reads patients, tattoos and treatments, joins them, and returns the dataset
/// along with every row-level problem found.
///
/// Treatments referencing an unknown tattoo, and tattoos referencing an unknown
/// patient, are recorded as `dangling_reference` issues and excluded.
pub fn ingest_readers<P: Read, T: Read, E: Read>(patients: P, tattoos: T, treatments: E) -> Result<Dataset> {
    let mut issues = Vec::new();

    let mut rdr = reader(patients);
    let cols = Columns::resolve("patients.csv", rdr.headers()?, &PATIENT_COLUMNS)?;
    let mut patient_rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut p = RowParser::new(&cols, &rec, i + 1);
        let id = p.req(0, "patient_id", |s| Some(s.to_string()));
        let rec_out = id.map(|patient_id| PatientRecord {
            patient_id,
            age: p.opt(1, "age", parse_count),
            sex_male: p.opt(2, "sex", parse_sex),
            hispanic: p.opt(3, "ethnicity", parse_hispanic),
            race: p.opt(4, "race", |s| s.parse::<Race>().ok()),
            treatment_total: p.opt(5, "treatment_total", parse_count),
            total_tattoos: p.opt(6, "total_tattoos", parse_count),
            fitzpatrick: p.opt(7, "fitzpatrick", |s| s.parse::<Fitzpatrick>().ok()),
            any_complication: p.opt(8, "complications", parse_flag),
        });
        if let Some(r) = rec_out {
            if !seen.insert(r.patient_id.clone()) {
                p.issue(IssueKind::DuplicateKey, format!("patient_id {} repeated; row excluded", r.patient_id));
            } else {
                patient_rows.push(r);
            }
        }
        issues.append(&mut p.issues);
    }

    let mut rdr = reader(tattoos);
    let cols = Columns::resolve("tattoos.csv", rdr.headers()?, &TATTOO_COLUMNS)?;
    let mut tattoo_rows = Vec::new();
    let mut tattoo_ids = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut p = RowParser::new(&cols, &rec, i + 1);
        let id = p.req(0, "tattoo_id", |s| Some(s.to_string()));
        let pid = p.req(1, "patient_id", |s| Some(s.to_string()));
        if let (Some(tattoo_id), Some(patient_id)) = (id, pid) {
            let t = TattooRecord {
                tattoo_id,
                patient_id,
                body_category: p.opt(2, "category", |s| Some(s.to_string())),
                tattoo_age: p.opt(3, "tattoo_age", parse_count),
                colored: p.opt(4, "colors", parse_colors),
                professional: p.opt(5, "professional", parse_flag),
                treatment_total: p.opt(6, "treatment_total", parse_count),
                fitzpatrick: p.opt(7, "fitzpatrick", |s| s.parse::<Fitzpatrick>().ok()),
                any_complication: p.opt(8, "complications", parse_flag),
            };
            if !seen.contains(&t.patient_id) {
                p.issue(
                    IssueKind::DanglingReference,
                    format!("tattoo {} references unknown patient {}; row excluded", t.tattoo_id, t.patient_id),
                );
            } else if !tattoo_ids.insert(t.tattoo_id.clone()) {
                p.issue(IssueKind::DuplicateKey, format!("tattoo_id {} repeated; row excluded", t.tattoo_id));
            } else {
                tattoo_rows.push(t);
            }
        }
        issues.append(&mut p.issues);
    }

    let mut rdr = reader(treatments);
    let cols = Columns::resolve("treatments.csv", rdr.headers()?, &TREATMENT_COLUMNS)?;
    let mut by_tattoo: HashMap<String, Vec<(i64, TreatmentEvent)>> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut p = RowParser::new(&cols, &rec, i + 1);
        let tattoo_id = p.req(0, "tattoo_id", |s| Some(s.to_string()));
        let day = p.req(1, "day", parse_day);
        let fluence = p.req(2, "fluence_j_cm2", parse_positive);
        let spot = p.req(3, "spot_size_mm", parse_positive);
        let wl = p.req(4, "wavelength_nm", parse_level(&WAVELENGTHS_NM));
        let fq = p.req(5, "frequency_hz", parse_level(&FREQUENCIES_HZ));
        let comp = match p.raw(6) {
            "" => Some(false),
            s => p.req(6, "complication", |_| parse_flag(s)),
        };
        if let (
            Some(tattoo_id),
            Some(day),
            Some(fluence),
            Some(spot_size),
            Some(wavelength),
            Some(frequency),
            Some(c),
        ) = (tattoo_id, day, fluence, spot, wl, fq, comp)
        {
            if !tattoo_ids.contains(&tattoo_id) {
                p.issue(
                    IssueKind::DanglingReference,
                    format!("treatment references unknown tattoo {tattoo_id}; event excluded"),
                );
            } else {
                let event = TreatmentEvent {
                    tattoo_id: tattoo_id.clone(),
                    day: 0,
                    fluence,
                    spot_size,
                    wavelength,
                    frequency,
                    complication_observed: c,
                };
                by_tattoo.entry(tattoo_id).or_default().push((day, event));
            }
        }
        issues.append(&mut p.issues);
    }

    let mut series = Vec::new();
    for t in &tattoo_rows {
        let Some(mut evs) = by_tattoo.remove(&t.tattoo_id) else { continue };
        evs.sort_by_key(|(d, _)| *d);
        let first = evs[0].0;
        let mut events = Vec::with_capacity(evs.len());
        for (d, mut e) in evs {
            match u32::try_from(d - first) {
                Ok(day) => {
                    e.day = day;
                    events.push(e);
                }
                Err(_) => issues.push(Issue {
                    kind: IssueKind::InvalidValue,
                    file: "treatments.csv".into(),
                    row: None,
                    message: format!("tattoo {}: day offset out of range; event excluded", t.tattoo_id),
                }),
            }
        }
        series.push(TreatmentSeries::new(t.tattoo_id.clone(), events)?);
    }

    Ok(Dataset { patients: patient_rows, tattoos: tattoo_rows, series, issues })
}
