//! Departures of an empirical photon-number distribution from a reference law.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::histogram::CountHistogram;
use super::pmf::Law;
use crate::error::{Error, Result};

pub const TAIL_ORDERS: [usize; 4] = [3, 4, 5, 6];

/// Minimum expected count per pooled bin in the goodness-of-fit test.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRatio {
    pub k: usize,
    /// Empirical `P(n >= k)`.
    pub empirical: f64,
    /// Reference `P(n >= k)`.
    pub reference: f64,
    pub ratio: f64,
    /// `(observed - expected) / sqrt(N p (1 - p))` for the count of windows
    /// with `n >= k`.
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailMetrics {
    /// `None` for a caller-supplied pmf.
    pub reference: Option<Law>,
    /// Reference evaluated at this (empirical) mean.
    pub mean: f64,
    /// `KL(empirical || reference)`; `None` when infinite.
    pub kl_divergence: Option<f64>,
    pub kl_infinite: bool,
    /// Pearson statistic over the union support, reference tail pooled
    /// beyond the largest observed `n`.
    pub chi_square: f64,
    pub chi_square_bins: usize,
    pub tail_ratios: Vec<TailRatio>,
}

impl TailMetrics {
    pub fn tail(&self, k: usize) -> Option<&TailRatio> {
        self.tail_ratios.iter().find(|t| t.k == k)
    }
}

fn empirical_tail(hist: &CountHistogram, k: usize) -> u64 {
    hist.counts_per_n().iter().skip(k).sum()
}

pub fn tail_metrics(hist: &CountHistogram, reference: Law) -> Result<TailMetrics> {
    let mean = hist.mean();
    let mut m = metrics_impl(hist, &|n| reference.pmf(mean, n), &|k| reference.tail(mean, k))?;
    m.reference = Some(reference);
    Ok(m)
}

/// As [`tail_metrics`] for an arbitrary reference `pmf(mean, n)`; tails are
/// obtained as one minus the head sum.
pub fn tail_metrics_with(
    hist: &CountHistogram,
    pmf: impl Fn(f64, usize) -> Result<f64>,
) -> Result<TailMetrics> {
    let mean = hist.mean();
    let p = |n| pmf(mean, n);
    let tail = |k: usize| -> Result<f64> {
        let head = (0..k).map(&p).sum::<Result<f64>>()?;
        Ok((1.0 - head).max(0.0))
    };
    metrics_impl(hist, &p, &tail)
}

fn metrics_impl(
    hist: &CountHistogram,
    pmf: &dyn Fn(usize) -> Result<f64>,
    tail: &dyn Fn(usize) -> Result<f64>,
) -> Result<TailMetrics> {
    if hist.n_windows() == 0 {
        return Err(Error::param("hist", "histogram has no windows"));
    }
    let mean = hist.mean();
    let total = hist.n_windows() as f64;
    let max_n = hist.max_n();

    let mut kl = 0.0;
    let mut kl_infinite = false;
    let mut chi_square = 0.0;
    for n in 0..=max_n {
        let p_ref = pmf(n)?;
        let p_emp = hist.probability(n);
        if p_emp > 0.0 {
            if p_ref > 0.0 {
                kl += p_emp * (p_emp / p_ref).ln();
            } else {
                kl_infinite = true;
            }
        }
        chi_square += pearson_term(hist.count(n) as f64, total * p_ref);
    }
    let beyond = tail(max_n + 1)?;
    let mut bins = max_n + 1;
    if beyond > 0.0 {
        chi_square += pearson_term(0.0, total * beyond);
        bins += 1;
    }

    let tail_ratios = TAIL_ORDERS
        .iter()
        .map(|&k| {
            let observed = empirical_tail(hist, k) as f64;
            let p = tail(k)?;
            let expected = total * p;
            let sd = (total * p * (1.0 - p)).sqrt();
            Ok(TailRatio {
                k,
                empirical: observed / total,
                reference: p,
                ratio: if p > 0.0 { observed / total / p } else { f64::INFINITY },
                z_score: if sd > 0.0 {
                    (observed - expected) / sd
                } else if observed > expected {
                    f64::INFINITY
                } else {
                    0.0
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(TailMetrics {
        reference: None,
        mean,
        kl_divergence: (!kl_infinite).then_some(kl),
        kl_infinite,
        chi_square,
        chi_square_bins: bins,
        tail_ratios,
    })
}

fn pearson_term(observed: f64, expected: f64) -> f64 {
    if expected > 0.0 {
        (observed - expected).powi(2) / expected
    } else if observed > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Pearson goodness-of-fit test against `reference` at the empirical mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    /// Pooled bins minus two (normalization and the fitted mean).
    pub dof: usize,
    pub p_value: f64,
    /// `(first n, observed, expected)` per pooled bin; the last bin is open-ended.
    pub bins: Vec<(usize, u64, f64)>,
}

impl GoodnessOfFit {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// Bins are pooled upward from `n = 0` until each holds at least
/// [`MIN_EXPECTED`] expected windows; the last bin absorbs the whole tail.
pub fn goodness_of_fit(hist: &CountHistogram, reference: Law) -> Result<GoodnessOfFit> {
    if hist.n_windows() == 0 {
        return Err(Error::param("hist", "histogram has no windows"));
    }
    let mean = hist.mean();
    let total = hist.n_windows() as f64;
    let mut bins: Vec<(usize, u64, f64)> = Vec::new();
    let mut start = 0;
    let mut obs = 0u64;
    let mut exp = 0.0;
    let mut n = 0;
    loop {
        let remaining = total * reference.tail(mean, n)?;
        if remaining < MIN_EXPECTED {
            // Close out with the open-ended tail.
            let tail_obs = empirical_tail(hist, n);
            if exp + remaining >= MIN_EXPECTED || bins.is_empty() {
                bins.push((start, obs + tail_obs, exp + remaining));
            } else {
                let last = bins.last_mut().unwrap();
                last.1 += obs + tail_obs;
                last.2 += exp + remaining;
            }
            break;
        }
        obs += hist.count(n);
        exp += total * reference.pmf(mean, n)?;
        n += 1;
        if exp >= MIN_EXPECTED {
            bins.push((start, obs, exp));
            start = n;
            obs = 0;
            exp = 0.0;
        }
    }
    let statistic: f64 = bins.iter().map(|(_, o, e)| pearson_term(*o as f64, *e)).sum();
    if bins.len() < 3 {
        return Err(Error::Undefined(format!(
            "only {} pooled bins; need at least 3 for a test with a fitted mean",
            bins.len()
        )));
    }
    let dof = bins.len() - 2;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Undefined(e.to_string()))?;
    Ok(GoodnessOfFit {
        statistic,
        dof,
        p_value: dist.sf(statistic),
        bins,
    })
}

/// Photon numbers whose empirical count falls outside the `sigmas`-wide
/// binomial band `N p +- sigmas sqrt(N p (1 - p))` of the reference.
pub fn band_violations(hist: &CountHistogram, reference: Law, sigmas: f64) -> Result<Vec<usize>> {
    let mean = hist.mean();
    let total = hist.n_windows() as f64;
    let mut out = Vec::new();
    for n in 0..=hist.max_n() {
        let p = reference.pmf(mean, n)?;
        let sd = (total * p * (1.0 - p)).sqrt();
        if (hist.count(n) as f64 - total * p).abs() > sigmas * sd {
            out.push(n);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expected_hist(law: Law, mean: f64, windows: f64) -> CountHistogram {
        let counts: Vec<u64> = (0..40)
            .map(|n| (windows * law.pmf(mean, n).unwrap()).round() as u64)
            .collect();
        CountHistogram::new(1.0, counts).unwrap()
    }

    #[test]
    fn self_comparison() {
        let h = expected_hist(Law::Geometric, 0.5, 1e7);
        let m = tail_metrics(&h, Law::Geometric).unwrap();
        assert!(m.kl_divergence.unwrap() < 1e-6);
        for t in &m.tail_ratios {
            assert!((t.ratio - 1.0).abs() < 0.01, "{t:?}");
            assert!(t.z_score.abs() < 3.0);
        }
        let gof = goodness_of_fit(&h, Law::Geometric).unwrap();
        assert!(gof.passes(0.01), "{gof:?}");
        assert!(band_violations(&h, Law::Geometric, 3.0).unwrap().is_empty());
    }

    #[test]
    fn small_support() {
        let h = CountHistogram::new(1.0, vec![900, 100]).unwrap();
        let m = tail_metrics(&h, Law::Geometric).unwrap();
        assert!(!m.kl_infinite);
        assert!(m.kl_divergence.unwrap().is_finite());
        assert!(m.chi_square.is_finite());
        // n = 0, n = 1 and the pooled reference tail n >= 2.
        assert_eq!(m.chi_square_bins, 3);
        assert_eq!(m.tail(5).unwrap().empirical, 0.0);
    }

    #[test]
    fn infinite_kl_is_flagged() {
        let h = CountHistogram::new(1.0, vec![5, 3, 2]).unwrap();
        // Reference with no mass at n = 2.
        let m = tail_metrics_with(&h, |_, n| Ok([0.6, 0.4, 0.0][n.min(2)])).unwrap();
        assert!(m.kl_infinite);
        assert_eq!(m.kl_divergence, None);
        assert!(m.chi_square.is_infinite());
        assert!(serde_json::to_string(&m).is_ok());
    }

    #[test]
    fn poisson_is_rejected_against_geometric() {
        let h = expected_hist(Law::Poisson, 0.5, 1e6);
        let gof = goodness_of_fit(&h, Law::Geometric).unwrap();
        assert!(gof.p_value < 1e-6);
        let m = tail_metrics(&h, Law::Geometric).unwrap();
        assert!(m.tail(3).unwrap().ratio < 1.0);
        assert!(m.tail(3).unwrap().z_score < -3.0);
    }
}
