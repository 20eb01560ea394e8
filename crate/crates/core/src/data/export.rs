use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use super::ingest::{PATIENT_COLUMNS, TATTOO_COLUMNS, TREATMENT_COLUMNS};
use super::Dataset;
use crate::{Error, Result};

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn flag(v: Option<bool>) -> String {
    match v {
        Some(true) => "1".into(),
        Some(false) => "0".into(),
        None => String::new(),
    }
}

pub fn write_patients<W: Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PATIENT_COLUMNS)?;
    for p in &ds.patients {
        out.write_record([
            p.patient_id.clone(),
            opt(&p.age),
            match p.sex_male {
                Some(true) => "M".into(),
                Some(false) => "F".into(),
                None => String::new(),
            },
            flag(p.hispanic),
            opt(&p.race),
            opt(&p.treatment_total),
            opt(&p.total_tattoos),
            p.fitzpatrick.map(|f| f.level().to_string()).unwrap_or_default(),
            flag(p.any_complication),
        ])?;
    }
    out.flush().map_err(|e| Error::io("patients.csv", e))
}

pub fn write_tattoos<W: Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TATTOO_COLUMNS)?;
    for t in &ds.tattoos {
        out.write_record([
            t.tattoo_id.clone(),
            t.patient_id.clone(),
            opt(&t.body_category),
            opt(&t.tattoo_age),
            flag(t.colored),
            flag(t.professional),
            opt(&t.treatment_total),
            t.fitzpatrick.map(|f| f.level().to_string()).unwrap_or_default(),
            flag(t.any_complication),
        ])?;
    }
    out.flush().map_err(|e| Error::io("tattoos.csv", e))
}

pub fn write_treatments<W: Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TREATMENT_COLUMNS)?;
    for s in &ds.series {
        for e in s.events() {
            out.write_record([
                e.tattoo_id.clone(),
                e.day.to_string(),
                e.fluence.to_string(),
                e.spot_size.to_string(),
                e.wavelength.to_string(),
                e.frequency.to_string(),
                flag(Some(e.complication_observed)),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("treatments.csv", e))
}

/// Writes `patients.csv`, `tattoos.csv` and `treatments.csv` into `dir`.
pub fn export_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        File::create(&p).map_err(|e| Error::io(p, e))
    };
    write_patients(ds, create("patients.csv")?)?;
    write_tattoos(ds, create("tattoos.csv")?)?;
    write_treatments(ds, create("treatments.csv")?)
}
