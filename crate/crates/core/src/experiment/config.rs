use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::DetectorParams;
use crate::error::{Error, Result};
use crate::light::{MixParams, ModulationParams, SpeckleParams};
use crate::stats::{Normalization, WindowTiling};

/// Which HBT number is reported as `g2_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum G2mSource {
    /// Pooled coincidences in the bins around zero lag.
    #[default]
    ZeroLag,
    /// `(1 + a)(1 + b)` from the two-timescale fit.
    Fit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoincidenceConfig {
    pub enabled: bool,
    pub bin: f64,
    pub max_lag: f64,
    pub normalization: Normalization,
    /// Total photon rate entering the beam splitter; `None` reuses
    /// `mean_rate_target`.
    pub hbt_rate: Option<f64>,
    /// Bins on each side of zero pooled into the zero-lag estimate.
    pub zero_lag_bins: usize,
    pub g2_m_source: G2mSource,
    pub fit: bool,
}

impl Default for CoincidenceConfig {
    fn default() -> Self {
        CoincidenceConfig {
            enabled: true,
            bin: 165e-12,
            max_lag: 20e-6,
            normalization: Normalization::Accidental,
            hbt_rate: None,
            zero_lag_bins: 1,
            g2_m_source: G2mSource::ZeroLag,
            fit: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table1Mode {
    /// One trace, attenuated to each target.
    #[default]
    Rescale,
    /// A fresh trace per target.
    Separate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1Config {
    pub mean_counts: Vec<f64>,
    pub mode: Table1Mode,
}

impl Default for Table1Config {
    fn default() -> Self {
        Table1Config {
            mean_counts: vec![0.1, 0.25, 0.5],
            mode: Table1Mode::Rescale,
        }
    }
}

/// One simulated measurement. Loaded from TOML; every time is in seconds
/// and every rate in photons per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    pub duration: f64,
    pub dt: f64,
    pub speckle: SpeckleParams,
    #[serde(default)]
    pub modulation: Option<ModulationParams>,
    #[serde(default)]
    pub mix: MixParams,
    #[serde(default)]
    pub detector: DetectorParams,
    /// Detected rate in the window-counting channel.
    pub mean_rate_target: f64,
    pub window: f64,
    pub n_windows: u64,
    #[serde(default)]
    pub tiling: WindowTiling,
    #[serde(default)]
    pub coincidence: CoincidenceConfig,
    #[serde(default)]
    pub table1: Table1Config,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_name() -> String {
    "experiment".into()
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Shortest correlation time among the configured sources.
    pub fn shortest_timescale(&self) -> f64 {
        match &self.modulation {
            Some(m) => m.correlation_time.min(self.speckle.coherence_time),
            None => self.speckle.coherence_time,
        }
    }

    pub fn hbt_rate(&self) -> f64 {
        self.coincidence.hbt_rate.unwrap_or(self.mean_rate_target)
    }

    /// Field checks first, then cross-field consistency.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::param("name", "must be a non-empty plain file name"));
        }
        positive("duration", self.duration)?;
        positive("dt", self.dt)?;
        self.speckle.validate()?;
        if let Some(m) = &self.modulation {
            m.validate()?;
        }
        self.mix.validate()?;
        self.detector.validate()?;
        positive("mean_rate_target", self.mean_rate_target)?;
        positive("window", self.window)?;
        if self.n_windows == 0 {
            return Err(Error::param("n_windows", "must be at least 1"));
        }
        if let WindowTiling::Strided { gap } = self.tiling {
            if !(gap >= 0.0 && gap.is_finite()) {
                return Err(Error::param("tiling.gap", format!("must be nonnegative, got {gap}")));
            }
        }
        if self.coincidence.enabled {
            let c = &self.coincidence;
            positive("coincidence.bin", c.bin)?;
            positive("coincidence.max_lag", c.max_lag)?;
            if c.max_lag < 10.0 * c.bin * (1.0 - 1e-12) {
                return Err(Error::param(
                    "coincidence.max_lag",
                    format!("must be at least 10 bins ({} s), got {}", 10.0 * c.bin, c.max_lag),
                ));
            }
            if c.max_lag >= self.duration {
                return Err(Error::param("coincidence.max_lag", "must be shorter than duration"));
            }
            if let Some(r) = c.hbt_rate {
                positive("coincidence.hbt_rate", r)?;
            }
            if let Normalization::FarLagBaseline { fraction } = c.normalization {
                if !(0.0..1.0).contains(&fraction) {
                    return Err(Error::param("coincidence.normalization.fraction", "must lie in [0, 1)"));
                }
            }
        }
        if self.table1.mean_counts.is_empty() {
            return Err(Error::param("table1.mean_counts", "must list at least one target"));
        }
        for &n in &self.table1.mean_counts {
            positive("table1.mean_counts", n)?;
        }

        let needed = self.tiling.required_span(self.window, self.n_windows);
        if self.duration < needed * (1.0 - 1e-9) {
            return Err(Error::param(
                "duration",
                format!(
                    "{} s is shorter than the {needed} s covered by n_windows = {} windows of {} s",
                    self.duration, self.n_windows, self.window
                ),
            ));
        }
        let tau = self.shortest_timescale();
        if self.dt > tau / 10.0 * (1.0 + 1e-12) {
            return Err(Error::param(
                "dt",
                format!("{} s exceeds a tenth of the shortest correlation time ({tau} s)", self.dt),
            ));
        }
        if self.duration < 10.0 * self.dt {
            return Err(Error::param("duration", "must cover at least 10 samples of dt"));
        }
        // Rates above the detected intensity cannot be reached by attenuation.
        let ceiling = self.detector.efficiency * self.speckle.mean_intensity * self.mean_transmission();
        for (field, rate) in [
            ("mean_rate_target", self.mean_rate_target),
            ("coincidence.hbt_rate", self.hbt_rate()),
        ] {
            if rate > ceiling {
                return Err(Error::param(
                    field,
                    format!(
                        "{rate} /s exceeds the detectable rate {ceiling} /s \
                         (speckle.mean_intensity x modulation mean x detector.efficiency)"
                    ),
                ));
            }
        }
        for &n in &self.table1.mean_counts {
            if n / self.window > ceiling {
                return Err(Error::param(
                    "table1.mean_counts",
                    format!("{n} photons per window needs more than the detectable rate {ceiling} /s"),
                ));
            }
        }
        Ok(())
    }

    /// Expected modulator transmission (1 without modulation).
    pub fn mean_transmission(&self) -> f64 {
        self.modulation
            .as_ref()
            .map(|m| m.transmission_moments().0)
            .unwrap_or(1.0)
    }
}
