use tattoo_stats_web::{randomization_json, studentized_range_quantile, synthetic_series};

#[test]
fn quantile_matches_the_library() {
    let q = studentized_range_quantile(0.95, 3, 30.0).unwrap();
    assert!((q - 3.486).abs() < 0.02, "{q}");
}

#[test]
fn randomization_parses_free_form_samples() {
    let json = randomization_json("10, 11", "1 2", 20_000, 3).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let p = v["p_value"].as_f64().unwrap();
    assert!((p - 1.0 / 3.0).abs() < 0.02, "{p}");
    assert!(randomization_json("1, x", "2", 10, 1).unwrap_err().contains("`x`"));
}

#[test]
fn series_chart_is_svg_and_rejects_unknown_settings() {
    let svg = synthetic_series(7, "spot_size").unwrap();
    assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(synthetic_series(7, "colour").is_err());
}
