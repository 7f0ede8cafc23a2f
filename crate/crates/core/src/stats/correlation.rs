//! Cross-correlation of two detector channels (start-multistop histogram).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::PhotonStream;
use crate::error::{Error, Result};

/// How raw coincidence counts are turned into `g2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the accidental level `r1 r2 bin (T - |lag|)` from singles rates.
    #[default]
    Accidental,
    /// Divide by the mean count of bins with `|lag| >= fraction * max_lag`.
    FarLagBaseline { fraction: f64 },
}

/// Binned, normalized `g2(t1 - t2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFunction {
    pub lag_bin_width: f64,
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Raw coincidence counts per bin.
    pub counts: Vec<u64>,
    /// Divisor applied to `counts` in each bin.
    pub normalization: Vec<f64>,
}

impl CorrelationFunction {
    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn zero_index(&self) -> usize {
        self.lags.len() / 2
    }

    /// Pools the bins within `half_width` bins of zero lag.
    pub fn zero_lag_estimate(&self, half_width: usize) -> (f64, f64) {
        let z = self.zero_index();
        let lo = z.saturating_sub(half_width);
        let hi = (z + half_width).min(self.len() - 1);
        let counts: u64 = self.counts[lo..=hi].iter().sum();
        let norm: f64 = self.normalization[lo..=hi].iter().sum();
        (counts as f64 / norm, (counts as f64).sqrt() / norm)
    }

    /// CSV with header `lag_seconds,g2,stderr`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "lag_seconds,g2,stderr")?;
        for i in 0..self.len() {
            writeln!(w, "{},{},{}", self.lags[i], self.values[i], self.stderr[i])?;
        }
        Ok(())
    }
}

/// Bin index of a time difference: `round(delta / bin)`.
#[inline]
fn lag_bin(delta: f64, bin: f64) -> i64 {
    (delta / bin).round() as i64
}

const START_BLOCK: usize = 1 << 15;

/// Histogram of `t1 - t2` over all pairs within `max_lag`, using the
/// accidental-coincidence normalization.
pub fn coincidence_histogram(
    s1: &PhotonStream,
    s2: &PhotonStream,
    bin: f64,
    max_lag: f64,
) -> Result<CorrelationFunction> {
    coincidence_histogram_with(s1, s2, bin, max_lag, Normalization::Accidental)
}

/// Bins are centered on `k * bin` for `k` in `-K..=K`, `K = round(max_lag / bin)`;
/// a pair lands in bin `round((t1 - t2) / bin)`. Only events inside the
/// overlap of the two spans are used.
pub fn coincidence_histogram_with(
    s1: &PhotonStream,
    s2: &PhotonStream,
    bin: f64,
    max_lag: f64,
    normalization: Normalization,
) -> Result<CorrelationFunction> {
    if !(bin > 0.0 && bin.is_finite()) {
        return Err(Error::param("coincidence.bin", format!("must be positive, got {bin}")));
    }
    if !(max_lag >= 10.0 * bin * (1.0 - 1e-12) && max_lag.is_finite()) {
        return Err(Error::param(
            "coincidence.max_lag",
            format!("must span at least 10 bins ({} s), got {max_lag}", 10.0 * bin),
        ));
    }
    let start = s1.span().0.max(s2.span().0);
    let end = s1.span().1.min(s2.span().1);
    let overlap = end - start;
    if !(overlap > 0.0) {
        return Err(Error::Incompatible("stream spans do not overlap".into()));
    }
    let a = s1.restrict(start, end)?;
    let b = s2.restrict(start, end)?;
    let half = (max_lag / bin).round() as i64;
    let n_bins = (2 * half + 1) as usize;
    let counts = pair_counts(a.timestamps(), b.timestamps(), bin, half);

    let lags: Vec<f64> = (-half..=half).map(|k| k as f64 * bin).collect();
    let norm: Vec<f64> = match normalization {
        Normalization::Accidental => {
            if a.is_empty() || b.is_empty() {
                return Err(Error::Undefined("a channel has no events in the overlap".into()));
            }
            let r1 = a.len() as f64 / overlap;
            let r2 = b.len() as f64 / overlap;
            lags.iter()
                .map(|lag| r1 * r2 * bin * (overlap - lag.abs()).max(0.0))
                .collect()
        }
        Normalization::FarLagBaseline { fraction } => {
            if !(0.0..1.0).contains(&fraction) {
                return Err(Error::param("normalization.fraction", "must lie in [0, 1)"));
            }
            let edge = fraction * half as f64 * bin;
            let far: Vec<u64> = lags
                .iter()
                .zip(&counts)
                .filter(|(lag, _)| lag.abs() >= edge)
                .map(|(_, c)| *c)
                .collect();
            let base = far.iter().sum::<u64>() as f64 / far.len() as f64;
            if !(base > 0.0) {
                return Err(Error::Undefined("no far-lag coincidences to normalize by".into()));
            }
            vec![base; n_bins]
        }
    };
    let values = counts.iter().zip(&norm).map(|(c, z)| *c as f64 / z).collect();
    let stderr = counts.iter().zip(&norm).map(|(c, z)| (*c as f64).sqrt() / z).collect();
    Ok(CorrelationFunction {
        lag_bin_width: bin,
        lags,
        values,
        stderr,
        counts,
        normalization: norm,
    })
}

/// Two-pointer sweep over sorted streams, parallel over blocks of start
/// events; integer counts merge exactly.
fn pair_counts(t1: &[f64], t2: &[f64], bin: f64, half: i64) -> Vec<u64> {
    let n_bins = (2 * half + 1) as usize;
    // Anything farther than this cannot round into an edge bin.
    let reach = (half as f64 + 1.0) * bin;
    t1.par_chunks(START_BLOCK)
        .map(|block| {
            let mut counts = vec![0u64; n_bins];
            let mut lo = t2.partition_point(|t| *t < block[0] - reach);
            for &t in block {
                while lo < t2.len() && t2[lo] < t - reach {
                    lo += 1;
                }
                let mut j = lo;
                while j < t2.len() && t2[j] <= t + reach {
                    let k = lag_bin(t - t2[j], bin);
                    if k.abs() <= half {
                        counts[(k + half) as usize] += 1;
                    }
                    j += 1;
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; n_bins],
            |mut acc, c| {
                for (a, b) in acc.iter_mut().zip(c) {
                    *a += b;
                }
                acc
            },
        )
}
