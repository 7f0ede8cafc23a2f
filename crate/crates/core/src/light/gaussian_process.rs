//! Stationary Gaussian processes on a uniform grid by circulant embedding.
//!
//! The covariance row is wrapped onto a circle long enough that the kernel
//! has decayed below double precision before the wrap point, so the
//! synthesized samples carry the target covariance exactly (up to
//! rounding) rather than an autoregressive approximation of it.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Functional form of a correlation function with timescale `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationShape {
    /// `exp(-(t/tau)^2)`
    #[default]
    Gaussian,
    /// `exp(-|t|/tau)`
    Exponential,
}

impl CorrelationShape {
    pub fn correlation(self, lag: f64, tau: f64) -> f64 {
        let x = lag.abs() / tau;
        match self {
            CorrelationShape::Gaussian => (-x * x).exp(),
            CorrelationShape::Exponential => (-x).exp(),
        }
    }

    /// Timescale of a field whose squared modulus has correlation
    /// `correlation(t, tau)`, i.e. `|gamma(t)|^2 = correlation(t, tau)`.
    pub fn field_timescale(self, tau: f64) -> f64 {
        match self {
            CorrelationShape::Gaussian => tau * std::f64::consts::SQRT_2,
            CorrelationShape::Exponential => 2.0 * tau,
        }
    }

    /// Lag beyond which the correlation is below ~1e-17.
    fn negligible_lag(self, tau: f64) -> f64 {
        match self {
            CorrelationShape::Gaussian => 6.5 * tau,
            CorrelationShape::Exponential => 40.0 * tau,
        }
    }
}

/// Smallest integer >= `n` whose prime factors are all in {2, 3, 5, 7}.
pub(crate) fn fft_friendly_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Draws `n` samples of a complex process whose real and imaginary parts
/// are independent, zero-mean, unit-variance stationary Gaussian processes
/// with correlation `shape.correlation(k*dt, tau)`.
pub fn sample_complex_process<R: Rng + ?Sized>(
    shape: CorrelationShape,
    tau: f64,
    n: usize,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", format!("must be positive, got {tau}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let pad = (shape.negligible_lag(tau) / dt).ceil() as usize;
    let m = fft_friendly_len(n + pad);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);

    // Eigenvalues of the circulant covariance.
    let mut eig: Vec<Complex64> = (0..m)
        .map(|k| {
            let lag = k.min(m - k) as f64 * dt;
            Complex64::new(shape.correlation(lag, tau), 0.0)
        })
        .collect();
    fft.process(&mut eig);
    let max_eig = eig.iter().map(|c| c.re).fold(0.0, f64::max);
    let negative_mass: f64 = eig.iter().map(|c| (-c.re).max(0.0)).sum();
    if negative_mass > 1e-8 * max_eig * m as f64 {
        return Err(Error::Degenerate(format!(
            "circulant embedding is not positive semidefinite (negative mass {negative_mass:e})"
        )));
    }

    let scale = 1.0 / m as f64;
    let mut buf: Vec<Complex64> = eig
        .iter()
        .map(|lambda| {
            let w = (lambda.re.max(0.0) * scale).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(w * re, w * im)
        })
        .collect();
    fft.process(&mut buf);
    // E|Z|^2 = 2, so each quadrature comes out with unit variance.
    buf.truncate(n);
    Ok(buf)
}

/// Real-valued variant: the real part of [`sample_complex_process`].
pub fn sample_real_process<R: Rng + ?Sized>(
    shape: CorrelationShape,
    tau: f64,
    n: usize,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(sample_complex_process(shape, tau, n, dt, rng)?
        .into_iter()
        .map(|c| c.re)
        .collect())
}
