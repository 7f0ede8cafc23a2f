//! Browser bindings: photon-number distribution, coincidence g2(tau) with
//! the two-timescale fit, and the calibration ladder.
//!
//! Every export returns a JSON string. The `*_json` functions hold the
//! logic and run natively too.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use superbunch::experiment::{calibrate, hbt_branch, presets, synthesize, window_branch, ExperimentConfig};
use superbunch::stats::{geometric_pmf, poisson_pmf, tail_metrics, Law};
use superbunch::Result;

/// Largest record the page may request, in simulated seconds.
pub const MAX_SECONDS: f64 = 0.5;
/// Photon numbers shown in the distribution plot.
const SHOWN_N: usize = 9;

/// Calibrated source with `g2(0) = target`, cut to `seconds` of light.
pub fn source(target: f64, seconds: f64, seed: u64) -> Result<ExperimentConfig> {
    if !(seconds > 0.0 && seconds <= MAX_SECONDS) {
        return Err(superbunch::Error::Config(format!(
            "record length must lie in (0, {MAX_SECONDS}] s, got {seconds}"
        )));
    }
    let mut base = presets::table1_base();
    base.seed = seed;
    base.duration = seconds;
    base.n_windows = (seconds / base.window).floor() as u64;
    let first = presets::TABLE1_TARGETS[0];
    let targets = if target == first { vec![first] } else { vec![first, target] };
    let ladder = calibrate(&base, &targets)?;
    Ok(ladder.last().map(|c| c.config.clone()).expect("one config per target"))
}

pub fn photon_statistics_json(target: f64, mean_n: f64, seconds: f64, seed: u64) -> Result<Value> {
    let cfg = source(target, seconds, seed)?;
    let trace = synthesize(&cfg, cfg.seed)?;
    let w = window_branch(&cfg, &trace, mean_n / cfg.window, 0)?;
    let mean = w.histogram.mean();
    let n: Vec<usize> = (0..SHOWN_N).collect();
    let geometric = n.iter().map(|&k| geometric_pmf(mean, k)).collect::<Result<Vec<_>>>()?;
    let poisson = n.iter().map(|&k| poisson_pmf(mean, k)).collect::<Result<Vec<_>>>()?;
    let tails = tail_metrics(&w.histogram, Law::Geometric)?;
    Ok(json!({
        "n": n,
        "empirical": n.iter().map(|&k| w.histogram.probability(k)).collect::<Vec<_>>(),
        "geometric": geometric,
        "poisson": poisson,
        "mean_n": mean,
        "n_windows": w.histogram.n_windows(),
        "g2_c": w.g2_c,
        "trace_g2": trace.g2_zero()?,
        "tail_ratios": tails.tail_ratios,
    }))
}

pub fn correlation_json(target: f64, seconds: f64, seed: u64) -> Result<Value> {
    let cfg = source(target, seconds, seed)?;
    let trace = synthesize(&cfg, cfg.seed)?;
    let h = hbt_branch(&cfg, &trace)?;
    let cf = &h.correlation;
    let fit = match &h.fit {
        Some(f) => json!({
            "a": f.a,
            "b": f.b,
            "tau_m": f.tau_m,
            "tau_g": f.tau_g,
            "g2_zero": f.g2_zero,
            "stderr": f.stderr,
            "curve": cf.lags.iter().map(|t| f.evaluate(*t)).collect::<Vec<_>>(),
        }),
        None => json!({ "error": h.fit_error }),
    };
    Ok(json!({
        "lags": cf.lags,
        "values": cf.values,
        "stderr": cf.stderr,
        "zero_lag": h.zero_lag,
        "rates": h.rates,
        "fit": fit,
        "true_tau_m": cfg.modulation.map(|m| m.correlation_time),
        "true_tau_g": cfg.speckle.coherence_time,
    }))
}

pub fn calibration_json(targets: &[f64]) -> Result<Value> {
    let ladder = calibrate(&presets::table1_base(), targets)?;
    Ok(Value::Array(
        ladder
            .iter()
            .map(|c| {
                json!({
                    "target_g2": c.target_g2,
                    "coherent_fraction": c.coherent_fraction,
                    "v_pp": c.v_pp,
                    "predicted_g2": c.predicted_g2,
                })
            })
            .collect(),
    ))
}

fn to_js(r: Result<Value>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Photon-number distribution in 5 us windows next to the geometric and
/// Poisson laws of the same mean.
#[wasm_bindgen]
pub fn photon_statistics(target_g2: f64, mean_n: f64, seconds: f64, seed: u32) -> Result<String, JsValue> {
    to_js(photon_statistics_json(target_g2, mean_n, seconds, u64::from(seed)))
}

/// Normalized coincidence histogram between two detectors and its fit.
#[wasm_bindgen]
pub fn correlation(target_g2: f64, seconds: f64, seed: u32) -> Result<String, JsValue> {
    to_js(correlation_json(target_g2, seconds, u64::from(seed)))
}

/// Coherent fraction and drive amplitude for each target, comma separated.
#[wasm_bindgen]
pub fn calibration(targets: &str) -> Result<String, JsValue> {
    let parsed: std::result::Result<Vec<f64>, _> = targets
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse::<f64>)
        .collect();
    match parsed {
        Ok(t) => to_js(calibration_json(&t)),
        Err(e) => Err(JsValue::from_str(&format!("targets: {e}"))),
    }
}
