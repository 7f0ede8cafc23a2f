use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gaussian_process::{sample_complex_process, CorrelationShape};
use super::trace::IntensityTrace;
use crate::error::{Error, Result};
use crate::rng::{derived_rng, tag};

/// Rotating-groundglass speckle source.
///
/// `coherence_time` is the decay time of the *intensity* correlation:
/// `g2(t) = 1 + shape.correlation(t, coherence_time)`. The underlying field
/// correlation is the square root of that shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeckleParams {
    pub coherence_time: f64,
    pub mean_intensity: f64,
    #[serde(default)]
    pub shape: CorrelationShape,
}

impl SpeckleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.coherence_time > 0.0 && self.coherence_time.is_finite()) {
            return Err(Error::param(
                "speckle.coherence_time",
                format!("must be positive, got {}", self.coherence_time),
            ));
        }
        if !(self.mean_intensity >= 0.0 && self.mean_intensity.is_finite()) {
            return Err(Error::param(
                "speckle.mean_intensity",
                format!("must be nonnegative, got {}", self.mean_intensity),
            ));
        }
        Ok(())
    }

    /// Normalized field correlation `|gamma(t)|`.
    pub fn field_correlation(&self, lag: f64) -> f64 {
        self.shape.correlation(lag, self.shape.field_timescale(self.coherence_time))
    }
}

/// Complex speckle field sampled on a uniform grid, scaled so that
/// `<|E|^2>` equals the configured mean intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeckleField {
    dt: f64,
    origin: f64,
    field: Vec<Complex64>,
}

impl SpeckleField {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.field
    }

    pub fn len(&self) -> usize {
        self.field.len()
    }

    pub fn is_empty(&self) -> bool {
        self.field.is_empty()
    }

    pub fn intensity(&self) -> IntensityTrace {
        IntensityTrace::new(self.dt, self.origin, self.field.iter().map(|e| e.norm_sqr()).collect())
            .expect("squared modulus is nonnegative")
    }
}

/// Samples needed for the grid to cover at least `duration`.
pub(crate) fn grid_len(duration: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !(duration >= dt && duration.is_finite()) {
        return Err(Error::param(
            "duration",
            format!("must be at least one sample ({dt} s), got {duration}"),
        ));
    }
    Ok(((duration / dt) * (1.0 - 1e-12)).ceil() as usize)
}

pub(crate) fn check_resolution(field: &'static str, dt: f64, timescale: f64) -> Result<()> {
    if dt > timescale / 10.0 * (1.0 + 1e-9) {
        return Err(Error::param(
            field,
            format!("sample spacing {dt} s is coarser than a tenth of the timescale {timescale} s"),
        ));
    }
    Ok(())
}

/// Circular complex Gaussian field for the given source, deterministic in `seed`.
pub fn gen_speckle_field(
    params: &SpeckleParams,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<SpeckleField> {
    params.validate()?;
    let n = grid_len(duration, dt)?;
    check_resolution("dt", dt, params.coherence_time)?;
    if params.mean_intensity == 0.0 {
        return Ok(SpeckleField {
            dt,
            origin: 0.0,
            field: vec![Complex64::new(0.0, 0.0); n],
        });
    }
    let mut rng = derived_rng(seed, tag::SPECKLE, 0);
    let tau_field = params.shape.field_timescale(params.coherence_time);
    let mut field = sample_complex_process(params.shape, tau_field, n, dt, &mut rng)?;
    // Unit-variance quadratures give <|E|^2> = 2.
    let amp = (params.mean_intensity / 2.0).sqrt();
    for e in &mut field {
        *e *= amp;
    }
    Ok(SpeckleField {
        dt,
        origin: 0.0,
        field,
    })
}

/// Pseudothermal intensity `|E(t)|^2`: exponential marginal, `g2(0) = 2`.
pub fn gen_speckle_intensity(
    params: &SpeckleParams,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<IntensityTrace> {
    Ok(gen_speckle_field(params, duration, dt, seed)?.intensity())
}
