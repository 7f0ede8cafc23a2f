//! Degree of second-order coherence from photon-number distributions.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::histogram::CountHistogram;
use crate::error::{Error, Result};
use crate::rng::{derived_rng, tag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// `sum P(n) n (n-1) / (sum P(n) n)^2` for a probability vector indexed by n.
pub fn g2_from_probabilities(probs: &[f64]) -> Result<f64> {
    let (f1, f2) = factorial_moments(probs.iter().copied());
    if !(f1 > 0.0) {
        return Err(Error::Undefined("g2 needs a positive mean photon number".into()));
    }
    Ok(f2 / (f1 * f1))
}

fn factorial_moments(weights: impl Iterator<Item = f64>) -> (f64, f64) {
    weights.enumerate().fold((0.0, 0.0), |(f1, f2), (n, p)| {
        let n = n as f64;
        (f1 + p * n, f2 + p * n * (n - 1.0))
    })
}

/// Point estimate plus delta-method standard error.
///
/// The windows are treated as i.i.d. draws of `n`, so the sample first and
/// second factorial moments have covariance `Cov(x, y) / N` with
/// `x = n`, `y = n(n-1)`.
pub fn g2_from_histogram(hist: &CountHistogram) -> Result<G2Estimate> {
    let probs = hist.probabilities();
    let value = g2_from_probabilities(&probs)?;
    let (f1, f2) = factorial_moments(probs.iter().copied());
    let (mut vxx, mut vyy, mut vxy) = (0.0, 0.0, 0.0);
    for (n, p) in probs.iter().enumerate() {
        let x = n as f64 - f1;
        let y = n as f64 * (n as f64 - 1.0) - f2;
        vxx += p * x * x;
        vyy += p * y * y;
        vxy += p * x * y;
    }
    let windows = hist.n_windows() as f64;
    let d_f2 = 1.0 / (f1 * f1);
    let d_f1 = -2.0 * f2 / (f1 * f1 * f1);
    let var = (d_f1 * d_f1 * vxx + d_f2 * d_f2 * vyy + 2.0 * d_f1 * d_f2 * vxy) / windows;
    Ok(G2Estimate {
        value,
        stderr: var.max(0.0).sqrt(),
    })
}

/// Multinomial bootstrap of the window histogram; slower cross-check of
/// the delta-method error.
pub fn g2_bootstrap(hist: &CountHistogram, resamples: usize, seed: u64) -> Result<G2Estimate> {
    let value = g2_from_histogram(hist)?.value;
    if resamples < 2 {
        return Err(Error::param("resamples", "need at least two resamples"));
    }
    let probs = hist.probabilities();
    let n_windows = hist.n_windows();
    let mut rng = derived_rng(seed, tag::BOOTSTRAP, 0);
    let mut replicates = Vec::with_capacity(resamples);
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..resamples {
        draw_multinomial(&mut rng, n_windows, &probs, &mut counts)?;
        let total = n_windows as f64;
        if let Ok(g) = g2_from_probabilities(
            &counts.iter().map(|c| *c as f64 / total).collect::<Vec<_>>(),
        ) {
            replicates.push(g);
        }
    }
    if replicates.len() < 2 {
        return Err(Error::Undefined("bootstrap replicates had no photons".into()));
    }
    let m = replicates.iter().sum::<f64>() / replicates.len() as f64;
    let var = replicates.iter().map(|g| (g - m).powi(2)).sum::<f64>() / (replicates.len() - 1) as f64;
    Ok(G2Estimate {
        value,
        stderr: var.sqrt(),
    })
}

fn draw_multinomial<R: Rng>(rng: &mut R, n: u64, probs: &[f64], out: &mut [u64]) -> Result<()> {
    let mut remaining = n;
    let mut mass = 1.0;
    for (i, p) in probs.iter().enumerate() {
        if remaining == 0 || i + 1 == probs.len() {
            out[i] = remaining;
            remaining = 0;
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q)
            .map_err(|e| Error::Undefined(format!("binomial: {e}")))?
            .sample(rng);
        out[i] = k;
        remaining -= k;
        mass -= p;
    }
    Ok(())
}
