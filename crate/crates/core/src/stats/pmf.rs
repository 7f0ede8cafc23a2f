//! Reference photon-number laws.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Mass beyond which analytic laws are truncated for moment sums.
pub const TRUNCATION_TAIL: f64 = 1e-12;

fn check_mean(mean: f64) -> Result<()> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::param("mean", format!("must be nonnegative, got {mean}")));
    }
    Ok(())
}

/// Bose-Einstein law `<n>^n / (1 + <n>)^(n+1)`.
pub fn geometric_pmf(mean: f64, n: usize) -> Result<f64> {
    check_mean(mean)?;
    if mean == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let ratio = mean / (1.0 + mean);
    Ok((n as f64 * ratio.ln()).exp() / (1.0 + mean))
}

/// Poisson law `e^{-<n>} <n>^n / n!`.
pub fn poisson_pmf(mean: f64, n: usize) -> Result<f64> {
    check_mean(mean)?;
    if mean == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let n_f = n as f64;
    Ok((n_f * mean.ln() - mean - ln_gamma(n_f + 1.0)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Law {
    Geometric,
    Poisson,
}

impl Law {
    pub fn pmf(self, mean: f64, n: usize) -> Result<f64> {
        match self {
            Law::Geometric => geometric_pmf(mean, n),
            Law::Poisson => poisson_pmf(mean, n),
        }
    }

    /// `P(n >= k)`.
    pub fn tail(self, mean: f64, k: usize) -> Result<f64> {
        check_mean(mean)?;
        match self {
            Law::Geometric => Ok((mean / (1.0 + mean)).powi(k as i32)),
            Law::Poisson => {
                let head: f64 = (0..k).map(|n| poisson_pmf(mean, n)).sum::<Result<f64>>()?;
                Ok((1.0 - head).max(0.0))
            }
        }
    }

    /// Probabilities `P(0..=N)` with `N` the first index at which the
    /// cumulative mass exceeds `1 - 1e-12`, renormalized to sum to one.
    pub fn truncated(self, mean: f64) -> Result<Vec<f64>> {
        check_mean(mean)?;
        let mut probs = Vec::new();
        let mut cumulative = 0.0;
        let mut n = 0;
        loop {
            let p = self.pmf(mean, n)?;
            probs.push(p);
            cumulative += p;
            if cumulative > 1.0 - TRUNCATION_TAIL || n > 100_000 {
                break;
            }
            n += 1;
        }
        let total: f64 = probs.iter().sum();
        Ok(probs.into_iter().map(|p| p / total).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(geometric_pmf(0.0, 0).unwrap(), 1.0);
        assert_eq!(geometric_pmf(0.0, 3).unwrap(), 0.0);
        assert!((geometric_pmf(0.1, 0).unwrap() - 1.0 / 1.1).abs() < 1e-15);
        assert_eq!(poisson_pmf(0.0, 0).unwrap(), 1.0);
        assert!((poisson_pmf(2.0, 3).unwrap() - (-2.0f64).exp() * 8.0 / 6.0).abs() < 1e-15);
        assert!(geometric_pmf(-0.1, 0).is_err());
        assert!(poisson_pmf(f64::NAN, 0).is_err());
    }

    #[test]
    fn normalization() {
        for i in 0..=50 {
            let mean = i as f64 * 0.1;
            for law in [Law::Geometric, Law::Poisson] {
                let s: f64 = (0..=200).map(|n| law.pmf(mean, n).unwrap()).sum();
                assert!((s - 1.0).abs() < 1e-10, "{law:?} mean {mean}: {s}");
            }
        }
        for mean in [0.0, 1.0, 10.0] {
            let s: f64 = (0..=100).map(|n| poisson_pmf(mean, n).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn tails_match_sums() {
        for law in [Law::Geometric, Law::Poisson] {
            for k in 0..8 {
                let direct: f64 = (k..400).map(|n| law.pmf(0.7, n).unwrap()).sum();
                assert!((law.tail(0.7, k).unwrap() - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn truncation_sums_to_one() {
        let p = Law::Geometric.truncated(0.5).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.len() > 20 && p.len() < 40);
    }
}
