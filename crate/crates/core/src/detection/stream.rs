use crate::error::{Error, Result};

/// Sorted photon arrival times (seconds) from one detector channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonStream {
    timestamps: Vec<f64>,
    channel: u16,
    span: (f64, f64),
}

impl PhotonStream {
    /// Validates strict monotonicity and containment in `span`.
    pub fn new(timestamps: Vec<f64>, channel: u16, span: (f64, f64)) -> Result<Self> {
        let (start, end) = span;
        if !(start.is_finite() && end.is_finite() && start <= end) {
            return Err(Error::Invariant(format!("bad span ({start}, {end})")));
        }
        if let Some(i) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Invariant(format!(
                "timestamps not strictly increasing at index {}: {} then {}",
                i + 1,
                timestamps[i],
                timestamps[i + 1]
            )));
        }
        if let (Some(first), Some(last)) = (timestamps.first(), timestamps.last()) {
            if *first < start || *last > end || !first.is_finite() || !last.is_finite() {
                return Err(Error::Invariant(format!(
                    "timestamps [{first}, {last}] fall outside span ({start}, {end})"
                )));
            }
        }
        Ok(PhotonStream {
            timestamps,
            channel,
            span,
        })
    }

    pub(crate) fn from_sorted_unchecked(timestamps: Vec<f64>, channel: u16, span: (f64, f64)) -> Self {
        debug_assert!(timestamps.windows(2).all(|w| w[1] > w[0]));
        PhotonStream {
            timestamps,
            channel,
            span,
        }
    }

    pub fn empty(channel: u16, span: (f64, f64)) -> Result<Self> {
        Self::new(Vec::new(), channel, span)
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn channel(&self) -> u16 {
        self.channel
    }

    pub fn with_channel(mut self, channel: u16) -> Self {
        self.channel = channel;
        self
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    pub fn span_length(&self) -> f64 {
        self.span.1 - self.span.0
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Mean detected rate over the span.
    pub fn rate(&self) -> f64 {
        let len = self.span_length();
        if len > 0.0 {
            self.timestamps.len() as f64 / len
        } else {
            0.0
        }
    }

    /// Events inside `[start, end)`, with the span narrowed to match.
    pub fn restrict(&self, start: f64, end: f64) -> Result<Self> {
        let lo = self.timestamps.partition_point(|t| *t < start);
        let hi = self.timestamps.partition_point(|t| *t < end);
        Self::new(self.timestamps[lo..hi].to_vec(), self.channel, (start, end))
    }

    pub fn min_gap(&self) -> Option<f64> {
        self.timestamps
            .windows(2)
            .map(|w| w[1] - w[0])
            .min_by(|a, b| a.total_cmp(b))
    }
}

/// Sorts, drops exact duplicates and wraps into a stream.
pub(crate) fn stream_from_unsorted(mut ts: Vec<f64>, channel: u16, span: (f64, f64)) -> PhotonStream {
    ts.sort_by(|a, b| a.total_cmp(b));
    ts.dedup();
    PhotonStream::from_sorted_unchecked(ts, channel, span)
}
