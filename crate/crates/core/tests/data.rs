use tattoo_stats::data::{
    ingest, ingest_readers, synthesize, write_patients, write_tattoos, write_treatments, Dataset, IssueKind,
    PlantedEffects, SynthConfig,
};
use tattoo_stats::featurize::{featurize_dataset, FeatureMode};
use tattoo_stats::Error;

fn small() -> SynthConfig {
    SynthConfig { patients: 60, tattoos: 200, complication_tattoos: Some(20), ..SynthConfig::default() }
}

fn export(ds: &Dataset) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let (mut p, mut t, mut e) = (Vec::new(), Vec::new(), Vec::new());
    write_patients(ds, &mut p).unwrap();
    write_tattoos(ds, &mut t).unwrap();
    write_treatments(ds, &mut e).unwrap();
    (p, t, e)
}

#[test]
fn export_then_ingest_round_trips() {
    for seed in 0..5 {
        let ds = synthesize(&small(), seed).unwrap();
        let (p, t, e) = export(&ds);
        let back = ingest_readers(p.as_slice(), t.as_slice(), e.as_slice()).unwrap();
        assert_eq!(back, ds, "seed {seed}");
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = export(&synthesize(&small(), 42).unwrap());
    let b = export(&synthesize(&small(), 42).unwrap());
    assert_eq!(a, b);
    let c = export(&synthesize(&small(), 43).unwrap());
    assert_ne!(a.2, c.2);
}

#[test]
fn synthetic_counts_and_series_shape() {
    let config = small();
    let ds = synthesize(&config, 7).unwrap();
    assert_eq!(ds.patients.len(), config.patients);
    assert_eq!(ds.tattoos.len(), config.tattoos);
    assert_eq!(ds.series.iter().filter(|s| s.has_complication()).count(), 20);
    for s in &ds.series {
        assert!(!s.is_empty());
        assert_eq!(s.days()[0], 0);
        assert!(s.days().windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn empty_and_inconsistent_configs() {
    let empty =
        synthesize(&SynthConfig { tattoos: 0, complication_tattoos: Some(0), ..SynthConfig::default() }, 1).unwrap();
    assert_eq!(empty.row_counts().series, 0);
    let bad = SynthConfig { tattoos: 10, patients: 5, complication_tattoos: Some(11), ..SynthConfig::default() };
    assert!(matches!(synthesize(&bad, 1), Err(Error::Parameter(_))));
}

#[test]
fn short_wavelength_tattoos_have_more_complications() {
    let mut effects = PlantedEffects::null();
    effects.features.insert(tattoo_stats::featurize::Feature::MeanWavelength, -0.004);
    effects.intercept = 1.2;
    let config =
        SynthConfig { patients: 2500, tattoos: 10_000, complication_tattoos: None, effects, ..SynthConfig::default() };
    let ds = synthesize(&config, 2024).unwrap();
    let rows = featurize_dataset(&ds, FeatureMode::FirstArrival);
    let rate = |keep: &dyn Fn(f64) -> bool| {
        let sel: Vec<bool> = rows.iter().filter(|r| keep(r.mean_wavelength)).map(|r| r.label).collect();
        sel.iter().filter(|&&l| l).count() as f64 / sel.len() as f64
    };
    let short = rate(&|w| w < 798.0);
    let long = rate(&|w| w >= 798.0);
    assert!(short > long + 0.05, "532-dominant {short:.3} vs 1064-dominant {long:.3}");
}

#[test]
fn ingest_reports_problems_without_dropping_them_silently() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synthesize(&small(), 3).unwrap();
    let (p, t, e) = export(&ds);
    let mut e = String::from_utf8(e).unwrap();
    e.push_str("T999999,0,2.0,4.5,1064,10,0\n");
    e.push_str(",0,2.0,4.5,1064,10,0\n");
    std::fs::write(dir.path().join("p.csv"), p).unwrap();
    std::fs::write(dir.path().join("t.csv"), t).unwrap();
    std::fs::write(dir.path().join("e.csv"), e).unwrap();
    let got = ingest(&dir.path().join("p.csv"), &dir.path().join("t.csv"), &dir.path().join("e.csv")).unwrap();
    assert_eq!(got.series.len(), ds.series.len());
    let kinds: Vec<IssueKind> = got.issues.iter().map(|i| i.kind).collect();
    assert!(kinds.contains(&IssueKind::DanglingReference), "{kinds:?}");
    assert!(kinds.contains(&IssueKind::MissingKey), "{kinds:?}");

    let missing = ingest(&dir.path().join("nope.csv"), &dir.path().join("t.csv"), &dir.path().join("e.csv"));
    assert!(matches!(missing, Err(Error::Io { .. })));
}

#[test]
fn malformed_header_names_the_column() {
    let ds = synthesize(&small(), 3).unwrap();
    let (p, t, _) = export(&ds);
    let e = "tattoo_id,day,fluence_j_cm2,spot_size_mm,wavelength_nm,complication\n";
    match ingest_readers(p.as_slice(), t.as_slice(), e.as_bytes()) {
        Err(Error::Schema { detail, .. }) => assert!(detail.contains("frequency"), "{detail}"),
        other => panic!("expected schema error, got {other:?}"),
    }
}
