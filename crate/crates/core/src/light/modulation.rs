use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::gaussian_process::{sample_real_process, CorrelationShape};
use super::speckle::{check_resolution, grid_len};
use super::trace::IntensityTrace;
use crate::error::{Error, Result};
use crate::rng::{derived_rng, tag};

/// Electro-optic intensity modulator between crossed polarizers, driven by
/// Gaussian noise.
///
/// The transmission is `sin^2(pi v / (2 v_pi) + bias_phase)`, with the drive
/// `v(t)` a zero-mean Gaussian process of standard deviation `v_pp / 6`
/// (peak-to-peak taken as +-3 sigma) and correlation
/// `shape.correlation(t, correlation_time)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationParams {
    pub correlation_time: f64,
    pub v_pp: f64,
    pub v_pi: f64,
    pub bias_phase: f64,
    #[serde(default)]
    pub shape: CorrelationShape,
}

impl ModulationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.correlation_time > 0.0 && self.correlation_time.is_finite()) {
            return Err(Error::param(
                "modulation.correlation_time",
                format!("must be positive, got {}", self.correlation_time),
            ));
        }
        if !(self.v_pp >= 0.0 && self.v_pp.is_finite()) {
            return Err(Error::param(
                "modulation.v_pp",
                format!("must be nonnegative, got {}", self.v_pp),
            ));
        }
        if !(self.v_pi > 0.0 && self.v_pi.is_finite()) {
            return Err(Error::param(
                "modulation.v_pi",
                format!("must be positive, got {}", self.v_pi),
            ));
        }
        if !self.bias_phase.is_finite() {
            return Err(Error::param("modulation.bias_phase", "must be finite"));
        }
        Ok(())
    }

    pub fn drive_sigma(&self) -> f64 {
        self.v_pp / 6.0
    }

    /// Variance of the optical phase `pi v / v_pi` (the argument of the
    /// double-angle form of the transmission).
    fn phase_variance(&self) -> f64 {
        let k = PI * self.drive_sigma() / self.v_pi;
        k * k
    }

    /// Exact `(<T>, <T^2>)` over the Gaussian drive.
    ///
    /// With `u = pi v / v_pi ~ N(0, s)` and `c = 2 bias`,
    /// `T = (1 - cos(u + c)) / 2`, and the Gaussian characteristic function
    /// gives `<cos(u + c)> = e^{-s/2} cos c`,
    /// `<cos^2(u + c)> = (1 + e^{-2s} cos 2c) / 2`.
    pub fn transmission_moments(&self) -> (f64, f64) {
        let s = self.phase_variance();
        let c = 2.0 * self.bias_phase;
        let m1_cos = (-s / 2.0).exp() * c.cos();
        let m2_cos = 0.5 * (1.0 + (-2.0 * s).exp() * (2.0 * c).cos());
        let mean = 0.5 * (1.0 - m1_cos);
        let second = 0.25 * (1.0 - 2.0 * m1_cos + m2_cos);
        (mean, second)
    }

    /// Analytic `<T^2>/<T>^2`.
    pub fn g2_zero(&self) -> Result<f64> {
        let (m1, m2) = self.transmission_moments();
        if m1 <= 1e-300 {
            return Err(Error::Undefined("modulator transmits nothing".into()));
        }
        Ok(m2 / (m1 * m1))
    }

    /// Analytic normalized transmission correlation `<T(0)T(t)>/<T>^2`.
    ///
    /// For drive correlation `rho`, `cov(cos(u1+c), cos(u2+c)) =
    /// e^{-s} (cos^2 c (cosh(s rho) - 1) + sin^2 c sinh(s rho))`.
    pub fn g2_at_lag(&self, lag: f64) -> Result<f64> {
        let (m1, _) = self.transmission_moments();
        if m1 <= 1e-300 {
            return Err(Error::Undefined("modulator transmits nothing".into()));
        }
        let s = self.phase_variance();
        let c = 2.0 * self.bias_phase;
        let rho = self.shape.correlation(lag, self.correlation_time);
        let cov = 0.25
            * (-s).exp()
            * (c.cos().powi(2) * ((s * rho).cosh() - 1.0) + c.sin().powi(2) * (s * rho).sinh());
        Ok(1.0 + cov / (m1 * m1))
    }
}

/// Modulator transmission trace, every sample in `[0, 1]`.
pub fn gen_modulation_intensity(
    params: &ModulationParams,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<IntensityTrace> {
    params.validate()?;
    let n = grid_len(duration, dt)?;
    check_resolution("dt", dt, params.correlation_time)?;
    let half_pi_over_vpi = PI / (2.0 * params.v_pi);
    let samples = if params.v_pp == 0.0 {
        vec![params.bias_phase.sin().powi(2); n]
    } else {
        let mut rng = derived_rng(seed, tag::MODULATION, 0);
        let sigma = params.drive_sigma();
        sample_real_process(params.shape, params.correlation_time, n, dt, &mut rng)?
            .into_iter()
            .map(|x| (half_pi_over_vpi * sigma * x + params.bias_phase).sin().powi(2))
            .collect()
    };
    IntensityTrace::new(dt, 0.0, samples)
}
