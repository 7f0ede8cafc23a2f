use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, G2mSource};
use crate::detection::{beam_split, sample_arrivals, PhotonStream};
use crate::error::{Error, Result};
use crate::light::{gen_modulation_intensity, gen_speckle_field, mix_coherent_background, multiply_traces, IntensityTrace};
use crate::rng::{derive_seed, tag};
use crate::stats::{
    coincidence_histogram_with, count_windows_tiled, fit_two_timescale_with, g2_from_histogram, goodness_of_fit,
    tail_metrics, CorrelationFunction, CountHistogram, FitGuess, FitResult, G2Estimate, GoodnessOfFit, Law,
    TailMetrics,
};

/// Index of the arrivals seed used by the beam-splitter branch; window
/// branches use `1 + level`.
const HBT_STREAM: u64 = 0;

/// Intensity at the detectors: speckle (with any coherent background) times
/// the modulator transmission.
pub fn synthesize(cfg: &ExperimentConfig, seed: u64) -> Result<IntensityTrace> {
    let field = gen_speckle_field(&cfg.speckle, cfg.duration, cfg.dt, seed)?;
    let speckle = mix_coherent_background(&field, &cfg.mix, seed)?;
    drop(field);
    match &cfg.modulation {
        Some(m) => {
            let t = gen_modulation_intensity(m, cfg.duration, cfg.dt, seed)?;
            multiply_traces(&speckle, &t)
        }
        None => Ok(speckle),
    }
}

/// Efficiency that turns `trace` into `rate` detected photons per second.
pub fn efficiency_for_rate(trace: &IntensityTrace, rate: f64) -> Result<f64> {
    let mean = trace.mean();
    if !(mean > 0.0) {
        return Err(Error::Undefined("trace carries no intensity".into()));
    }
    let e = rate / mean;
    if e > 1.0 {
        return Err(Error::param(
            "mean_rate_target",
            format!("{rate} /s exceeds the simulated mean intensity {mean} /s"),
        ));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub rate_target: f64,
    pub efficiency: f64,
    pub histogram: CountHistogram,
    pub mean_n: f64,
    pub g2_c: G2Estimate,
}

/// Single detector behind an attenuator, counting photons per window.
pub fn window_branch(cfg: &ExperimentConfig, trace: &IntensityTrace, rate: f64, level: u64) -> Result<WindowResult> {
    let efficiency = efficiency_for_rate(trace, rate)?;
    let seed = derive_seed(cfg.seed, tag::ARRIVALS, 1 + level);
    let arrivals = sample_arrivals(trace, efficiency, seed)?;
    let detected = cfg.detector.detect(&arrivals, seed)?;
    let histogram = count_windows_tiled(&detected, cfg.window, cfg.n_windows, cfg.tiling)?;
    let g2_c = g2_from_histogram(&histogram)?;
    Ok(WindowResult {
        rate_target: rate,
        efficiency,
        mean_n: histogram.mean(),
        histogram,
        g2_c,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbtResult {
    pub correlation: CorrelationFunction,
    /// Detected singles rates of the two channels.
    pub rates: [f64; 2],
    pub zero_lag: G2Estimate,
    pub fit: Option<FitResult>,
    pub fit_error: Option<String>,
    /// The number reported as `g2_m`.
    pub g2_m: G2Estimate,
}

/// 50:50 beam splitter, two detectors, coincidence histogram and fit.
pub fn hbt_branch(cfg: &ExperimentConfig, trace: &IntensityTrace) -> Result<HbtResult> {
    let c = &cfg.coincidence;
    let efficiency = efficiency_for_rate(trace, cfg.hbt_rate())?;
    let seed = derive_seed(cfg.seed, tag::ARRIVALS, HBT_STREAM);
    let arrivals = sample_arrivals(trace, efficiency, seed)?;
    let (a, b) = beam_split(&arrivals, 0.5, seed)?;
    drop(arrivals);
    let a = cfg.detector.detect(&a, seed)?;
    let b = cfg.detector.detect(&b, seed)?;
    let correlation = coincidence_histogram_with(&a, &b, c.bin, c.max_lag, c.normalization)?;
    let (value, stderr) = correlation.zero_lag_estimate(c.zero_lag_bins);
    let zero_lag = G2Estimate { value, stderr };
    let (fit, fit_error) = if c.fit {
        let guess = FitGuess::from_curve(&correlation);
        match fit_two_timescale_with(&correlation, guess, cfg.speckle.shape) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    let g2_m = match c.g2_m_source {
        G2mSource::ZeroLag => zero_lag,
        G2mSource::Fit => match &fit {
            Some(f) => G2Estimate {
                value: f.g2_zero,
                stderr: f.stderr.g2_zero,
            },
            None => {
                return Err(Error::Undefined(format!(
                    "g2_m is taken from the fit, which failed: {}",
                    fit_error.as_deref().unwrap_or("fit disabled")
                )))
            }
        },
    };
    Ok(HbtResult {
        rates: [rate_of(&a), rate_of(&b)],
        correlation,
        zero_lag,
        fit,
        fit_error,
        g2_m,
    })
}

fn rate_of(s: &PhotonStream) -> f64 {
    s.len() as f64 / s.span_length()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub samples: usize,
    pub dt: f64,
    pub mean_intensity: f64,
    /// `<I^2>/<I>^2` of the simulated trace.
    pub g2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub trace: TraceSummary,
    pub window: WindowResult,
    pub tails: TailMetrics,
    /// `None` when too few photon numbers are populated for a test.
    pub goodness_of_fit: Option<GoodnessOfFit>,
    pub hbt: Option<HbtResult>,
}

/// Flat summary document written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub g2_m: Option<G2Estimate>,
    pub g2_m_zero_lag: Option<G2Estimate>,
    pub g2_m_fit: Option<G2Estimate>,
    pub g2_c: G2Estimate,
    pub mean_n: f64,
    pub window: f64,
    pub n_windows: u64,
    pub sampling_efficiency: f64,
    pub trace: TraceSummary,
    pub hbt_rates: Option<[f64; 2]>,
    pub tail_metrics: TailMetrics,
    pub goodness_of_fit: Option<GoodnessOfFit>,
}

impl RunReport {
    pub fn summary(&self) -> Summary {
        Summary {
            name: self.name.clone(),
            seed: self.seed,
            g2_m: self.hbt.as_ref().map(|h| h.g2_m),
            g2_m_zero_lag: self.hbt.as_ref().map(|h| h.zero_lag),
            g2_m_fit: self.hbt.as_ref().and_then(|h| h.fit.as_ref()).map(|f| G2Estimate {
                value: f.g2_zero,
                stderr: f.stderr.g2_zero,
            }),
            g2_c: self.window.g2_c,
            mean_n: self.window.mean_n,
            window: self.window.histogram.window_width(),
            n_windows: self.window.histogram.n_windows(),
            sampling_efficiency: self.window.efficiency,
            trace: self.trace.clone(),
            hbt_rates: self.hbt.as_ref().map(|h| h.rates),
            tail_metrics: self.tails.clone(),
            goodness_of_fit: self.goodness_of_fit.clone(),
        }
    }

    /// Writes `histogram.csv`, `g2_tau.csv`, `fit.json` and `summary.json`
    /// into `dir`, each atomically.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        self.window.histogram.write_csv(&mut buf)?;
        write_atomic(&dir.join("histogram.csv"), &buf)?;
        if let Some(h) = &self.hbt {
            buf.clear();
            h.correlation.write_csv(&mut buf)?;
            write_atomic(&dir.join("g2_tau.csv"), &buf)?;
            let fit_doc = match (&h.fit, &h.fit_error) {
                (Some(f), _) => serde_json::to_vec_pretty(f)?,
                (None, Some(e)) => serde_json::to_vec_pretty(&serde_json::json!({ "error": e }))?,
                (None, None) => serde_json::to_vec_pretty(&serde_json::json!({ "error": "fit disabled" }))?,
            };
            write_atomic(&dir.join("fit.json"), &with_newline(fit_doc))?;
        }
        let summary = serde_json::to_vec_pretty(&self.summary())?;
        write_atomic(&dir.join("summary.json"), &with_newline(summary))
    }
}

fn with_newline(mut v: Vec<u8>) -> Vec<u8> {
    v.push(b'\n');
    v
}

/// Write to a hidden sibling, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs the full pipeline in memory.
pub fn simulate(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let trace = synthesize(cfg, cfg.seed)?;
    let trace_summary = TraceSummary {
        samples: trace.len(),
        dt: trace.dt(),
        mean_intensity: trace.mean(),
        g2: trace.g2_zero()?,
    };
    let window = window_branch(cfg, &trace, cfg.mean_rate_target, 0)?;
    let tails = tail_metrics(&window.histogram, Law::Geometric)?;
    let goodness_of_fit = goodness_of_fit(&window.histogram, Law::Geometric).ok();
    let hbt = if cfg.coincidence.enabled {
        Some(hbt_branch(cfg, &trace)?)
    } else {
        None
    };
    Ok(RunReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        trace: trace_summary,
        window,
        tails,
        goodness_of_fit,
        hbt,
    })
}

/// Runs the pipeline and, when `cfg.output_dir` is set, writes the outputs there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let report = simulate(cfg)?;
    if let Some(dir) = &cfg.output_dir {
        report.write_outputs(dir)?;
    }
    Ok(report)
}
