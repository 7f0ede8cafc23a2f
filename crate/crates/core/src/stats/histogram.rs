use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::PhotonStream;
use crate::error::{Error, Result};

/// How counting windows are laid along the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WindowTiling {
    /// Back-to-back windows.
    #[default]
    Contiguous,
    /// Windows separated by `gap` seconds of unused record.
    Strided { gap: f64 },
}

impl WindowTiling {
    fn gap(self) -> f64 {
        match self {
            WindowTiling::Contiguous => 0.0,
            WindowTiling::Strided { gap } => gap,
        }
    }

    /// Record length needed for `n_windows` windows of width `width`.
    pub fn required_span(self, width: f64, n_windows: u64) -> f64 {
        if n_windows == 0 {
            return 0.0;
        }
        n_windows as f64 * width + (n_windows - 1) as f64 * self.gap()
    }
}

/// Empirical photon-number distribution over fixed-width windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountHistogram {
    window_width: f64,
    n_windows: u64,
    /// `counts_per_n[n]` = number of windows holding exactly `n` photons.
    counts_per_n: Vec<u64>,
}

impl CountHistogram {
    pub fn new(window_width: f64, counts_per_n: Vec<u64>) -> Result<Self> {
        if !(window_width > 0.0 && window_width.is_finite()) {
            return Err(Error::param("window", format!("must be positive, got {window_width}")));
        }
        let mut counts_per_n = counts_per_n;
        while counts_per_n.len() > 1 && counts_per_n.last() == Some(&0) {
            counts_per_n.pop();
        }
        let n_windows = counts_per_n.iter().sum();
        Ok(CountHistogram {
            window_width,
            n_windows,
            counts_per_n,
        })
    }

    /// Histogram of per-window photon numbers.
    pub fn from_window_counts(window_width: f64, counts: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut freq: Vec<u64> = Vec::new();
        for c in counts {
            let c = c as usize;
            if c >= freq.len() {
                freq.resize(c + 1, 0);
            }
            freq[c] += 1;
        }
        Self::new(window_width, freq)
    }

    pub fn window_width(&self) -> f64 {
        self.window_width
    }

    pub fn n_windows(&self) -> u64 {
        self.n_windows
    }

    pub fn counts_per_n(&self) -> &[u64] {
        &self.counts_per_n
    }

    pub fn max_n(&self) -> usize {
        self.counts_per_n.len().saturating_sub(1)
    }

    pub fn count(&self, n: usize) -> u64 {
        self.counts_per_n.get(n).copied().unwrap_or(0)
    }

    pub fn probability(&self, n: usize) -> f64 {
        if self.n_windows == 0 {
            return 0.0;
        }
        self.count(n) as f64 / self.n_windows as f64
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.counts_per_n.len()).map(|n| self.probability(n)).collect()
    }

    pub fn total_photons(&self) -> u64 {
        self.counts_per_n
            .iter()
            .enumerate()
            .map(|(n, c)| n as u64 * c)
            .sum()
    }

    /// `<n> = sum n P(n)`, computed from integer totals.
    pub fn mean(&self) -> f64 {
        if self.n_windows == 0 {
            return 0.0;
        }
        self.total_photons() as f64 / self.n_windows as f64
    }

    /// Combines histograms of the same window width.
    pub fn merge(&self, other: &CountHistogram) -> Result<CountHistogram> {
        if self.window_width != other.window_width {
            return Err(Error::Incompatible("window widths differ".into()));
        }
        let len = self.counts_per_n.len().max(other.counts_per_n.len());
        let counts = (0..len).map(|n| self.count(n) + other.count(n)).collect();
        CountHistogram::new(self.window_width, counts)
    }

    /// CSV with header `n,count,probability`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "n,count,probability")?;
        for (n, c) in self.counts_per_n.iter().enumerate() {
            writeln!(w, "{n},{c},{}", self.probability(n))?;
        }
        Ok(())
    }
}

const WINDOW_BLOCK: u64 = 1 << 14;

/// Counts photons in `n_windows` contiguous windows `[t, t + width)`
/// starting at the stream's span start.
pub fn count_windows(stream: &PhotonStream, width: f64, n_windows: u64) -> Result<CountHistogram> {
    count_windows_tiled(stream, width, n_windows, WindowTiling::Contiguous)
}

pub fn count_windows_tiled(
    stream: &PhotonStream,
    width: f64,
    n_windows: u64,
    tiling: WindowTiling,
) -> Result<CountHistogram> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::param("window", format!("must be positive, got {width}")));
    }
    if n_windows == 0 {
        return Err(Error::param("n_windows", "must be at least 1"));
    }
    let gap = tiling.gap();
    if !(gap >= 0.0 && gap.is_finite()) {
        return Err(Error::param("tiling.gap", format!("must be nonnegative, got {gap}")));
    }
    let needed = tiling.required_span(width, n_windows);
    // Tolerate rounding in span arithmetic at the 1e-9 relative level.
    if stream.span_length() < needed * (1.0 - 1e-9) {
        return Err(Error::param(
            "n_windows",
            format!(
                "stream span {} s is shorter than the {} s needed for {n_windows} windows",
                stream.span_length(),
                needed
            ),
        ));
    }
    let start = stream.span().0;
    let period = width + gap;
    let ts = stream.timestamps();
    let n_blocks = n_windows.div_ceil(WINDOW_BLOCK);

    let partials: Vec<Vec<u64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let first = b * WINDOW_BLOCK;
            let last = ((b + 1) * WINDOW_BLOCK).min(n_windows);
            let mut freq: Vec<u64> = vec![0; 1];
            let mut j = ts.partition_point(|t| *t < start + first as f64 * period);
            for w in first..last {
                let lo = start + w as f64 * period;
                let hi = lo + width;
                while j < ts.len() && ts[j] < lo {
                    j += 1;
                }
                let mut n = 0usize;
                while j < ts.len() && ts[j] < hi {
                    n += 1;
                    j += 1;
                }
                if n >= freq.len() {
                    freq.resize(n + 1, 0);
                }
                freq[n] += 1;
            }
            freq
        })
        .collect();

    let len = partials.iter().map(Vec::len).max().unwrap_or(1);
    let mut freq = vec![0u64; len];
    for p in partials {
        for (n, c) in p.into_iter().enumerate() {
            freq[n] += c;
        }
    }
    CountHistogram::new(width, freq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_stream_all_zero() {
        let s = PhotonStream::empty(0, (0.0, 1.0)).unwrap();
        let h = count_windows(&s, 0.01, 100).unwrap();
        assert_eq!(h.n_windows(), 100);
        assert_eq!(h.probability(0), 1.0);
        assert_eq!(h.mean(), 0.0);
    }

    #[test]
    fn direct_count_example() {
        let t = 1e-6;
        let s = PhotonStream::new(vec![0.5 * t, 1.5 * t, 1.6 * t], 0, (0.0, 2.0 * t)).unwrap();
        let h = count_windows(&s, t, 2).unwrap();
        assert_eq!(h.counts_per_n(), &[0, 1, 1]);
        assert_eq!(h.probability(1), 0.5);
        assert_eq!(h.probability(2), 0.5);
        assert!((h.mean() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn windows_are_half_open() {
        let s = PhotonStream::new(vec![0.0, 1.0, 2.0], 0, (0.0, 3.0)).unwrap();
        let h = count_windows(&s, 1.0, 3).unwrap();
        assert_eq!(h.counts_per_n(), &[0, 3]);
    }

    #[test]
    fn strided_windows_skip_gaps() {
        let s = PhotonStream::new(vec![0.5, 1.5, 2.5, 3.5], 0, (0.0, 4.0)).unwrap();
        let h = count_windows_tiled(&s, 1.0, 2, WindowTiling::Strided { gap: 1.0 }).unwrap();
        // windows [0,1) and [2,3)
        assert_eq!(h.counts_per_n(), &[0, 2]);
    }

    #[test]
    fn errors() {
        let s = PhotonStream::empty(0, (0.0, 1.0)).unwrap();
        assert!(count_windows(&s, 0.1, 11).is_err());
        assert!(count_windows(&s, 0.0, 1).is_err());
        assert!(count_windows(&s, -1.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn invariants_hold(mut ts in proptest::collection::vec(0.0f64..100.0, 0..400), width in 0.5f64..5.0) {
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            let s = PhotonStream::new(ts.clone(), 0, (0.0, 100.0)).unwrap();
            let n_windows = (100.0 / width).floor() as u64;
            let h = count_windows(&s, width, n_windows).unwrap();
            prop_assert_eq!(h.counts_per_n().iter().sum::<u64>(), h.n_windows());
            let mean: f64 = h.probabilities().iter().enumerate().map(|(n, p)| n as f64 * p).sum();
            prop_assert!((mean - h.mean()).abs() < 1e-12);
            let inside = ts.iter().filter(|t| **t < n_windows as f64 * width).count() as u64;
            prop_assert!(h.total_photons() <= inside);
            prop_assert!(h.total_photons() + 2 >= inside);
        }
    }
}
