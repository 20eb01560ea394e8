//! WebAssembly bindings behind `www/index.html`.
//!
//! Each export takes plain numbers or strings and returns a number or a string
//! (JSON or SVG), so the page needs no glue beyond the generated module.

use tattoo_stats::data::{synthesize, Setting, SynthConfig};
use tattoo_stats::distributions::DistSpec;
use tattoo_stats::hypothesis::{randomization_test, RandomizationStatistic};
use tattoo_stats::report::plot_series;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn parse_sample(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect()
}

/// Upper `p` quantile of the studentized range for `k` groups and `df` error
/// degrees of freedom.
#[wasm_bindgen]
pub fn studentized_range_quantile(p: f64, k: u32, df: f64) -> Result<f64, JsValue> {
    DistSpec::StudentizedRange { k, df }.quantile(p).map_err(js_err)
}

/// Two-sided randomization test on the difference in means. Samples are
/// comma- or whitespace-separated numbers; the result is the test report as JSON.
pub fn randomization_json(a: &str, b: &str, n_perm: u32, seed: u32) -> Result<String, String> {
    let (a, b) = (parse_sample(a)?, parse_sample(b)?);
    let rep = randomization_test(&a, &b, u64::from(n_perm), u64::from(seed), RandomizationStatistic::MeanDiff)
        .map_err(|e| e.to_string())?;
    serde_json::to_string(&rep).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn randomization(a: &str, b: &str, n_perm: u32, seed: u32) -> Result<String, JsValue> {
    randomization_json(a, b, n_perm, seed).map_err(js_err)
}

/// Synthesizes a small cohort and charts the longest treatment series.
pub fn synthetic_series(seed: u32, setting: &str) -> Result<String, String> {
    let setting: Setting = setting.parse().map_err(|e: tattoo_stats::Error| e.to_string())?;
    let config = SynthConfig { patients: 40, tattoos: 120, complication_tattoos: Some(12), ..SynthConfig::default() };
    let ds = synthesize(&config, u64::from(seed)).map_err(|e| e.to_string())?;
    let longest = ds.series.iter().max_by_key(|s| s.len()).ok_or("no treatment series were generated")?;
    Ok(plot_series(longest, setting))
}

#[wasm_bindgen]
pub fn synthetic_series_svg(seed: u32, setting: &str) -> Result<String, JsValue> {
    synthetic_series(seed, setting).map_err(js_err)
}
