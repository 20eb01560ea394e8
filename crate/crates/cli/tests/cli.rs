use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tattoo-stats"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    let json = r#"{
        "synth": { "patients": 80, "tattoos": 300, "complication_tattoos": 30 },
        "n_perm": 500,
        "sims": 3,
        "boost": { "grid": { "trees": [20], "lambdas": [0.1], "max_splits": [1] }, "cv": { "folds": 3, "repeats": 1 } },
        "plots": { "series": 1 }
    }"#;
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn synth(dir: &Path, seed: &str) -> std::path::PathBuf {
    let config = write_config(dir);
    let out = dir.join(format!("data{seed}"));
    let o = run(&["synth", "--config", &config, "--seed", seed, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn synth_then_ingest_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "3");
    for f in ["patients.csv", "tattoos.csv", "treatments.csv", "synth_summary.json"] {
        assert!(data.join(f).is_file(), "{f}");
    }
    let p = |f: &str| data.join(f).to_str().unwrap().to_string();
    let o = run(&[
        "ingest",
        "--patients",
        &p("patients.csv"),
        "--tattoos",
        &p("tattoos.csv"),
        "--treatments",
        &p("treatments.csv"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("80 patients, 300 tattoos"));
}

#[test]
fn ingest_with_bad_rows_exits_two_and_writes_issues() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "4");
    let mut e = std::fs::read_to_string(data.join("treatments.csv")).unwrap();
    e.push_str("T999999,0,2.0,4.5,1064,10,0\n");
    std::fs::write(data.join("treatments.csv"), e).unwrap();
    let p = |f: &str| data.join(f).to_str().unwrap().to_string();
    let issues = dir.path().join("issues");
    let o = run(&[
        "ingest",
        "--patients",
        &p("patients.csv"),
        "--tattoos",
        &p("tattoos.csv"),
        "--treatments",
        &p("treatments.csv"),
        "--out",
        issues.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(std::fs::read_to_string(issues.join("issues.csv")).unwrap().contains("T999999"));
}

#[test]
fn missing_seed_exits_one_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("report");
    let o = run(&["report", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    assert!(!out.exists());
}

#[test]
fn missing_input_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let nope = dir.path().join("nope.csv");
    let n = nope.to_str().unwrap();
    let o = run(&["ingest", "--patients", n, "--tattoos", n, "--treatments", n]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tests_subcommand_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("tests");
    let o = run(&["tests", "--config", &config, "--seed", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["t4_proportions.csv", "t6_ttests.csv", "t8_kruskal.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert!(!out.join("t10_models.csv").exists());
}

#[test]
fn plot_series_goes_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "6");
    let tattoos = std::fs::read_to_string(data.join("tattoos.csv")).unwrap();
    let id = tattoos.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    let config = write_config(dir.path());
    let o = run(&["plot", "--tattoo", &id, "--setting", "spot_size", "--config", &config, "--seed", "6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = String::from_utf8(o.stdout).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.trim_end().ends_with("</svg>"));

    let o = run(&["plot", "--tattoo", "no-such-tattoo", "--config", &config, "--seed", "6"]);
    assert_eq!(o.status.code(), Some(1));
}
