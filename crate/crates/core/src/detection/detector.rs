use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::sampling::add_dark_counts;
use super::stream::{stream_from_unsorted, PhotonStream};
use crate::error::{Error, Result};
use crate::rng::{derived_rng, tag};

/// Single-photon avalanche detector model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    pub dead_time: f64,
    pub jitter_rms: f64,
    pub efficiency: f64,
    pub dark_count_rate: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            dead_time: 35e-9,
            jitter_rms: 0.35e-9,
            efficiency: 1.0,
            dark_count_rate: 0.0,
        }
    }
}

impl DetectorParams {
    /// No dead time, jitter or dark counts.
    pub fn ideal() -> Self {
        DetectorParams {
            dead_time: 0.0,
            jitter_rms: 0.0,
            efficiency: 1.0,
            dark_count_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dead_time >= 0.0 && self.dead_time.is_finite()) {
            return Err(Error::param("detector.dead_time", "must be nonnegative"));
        }
        if !(self.jitter_rms >= 0.0 && self.jitter_rms.is_finite()) {
            return Err(Error::param("detector.jitter_rms", "must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::param("detector.efficiency", "must lie in [0, 1]"));
        }
        if !(self.dark_count_rate >= 0.0 && self.dark_count_rate.is_finite()) {
            return Err(Error::param("detector.dark_count_rate", "must be nonnegative"));
        }
        Ok(())
    }

    /// Dark counts, then dead time on true arrival times, then timing jitter.
    pub fn detect(&self, stream: &PhotonStream, seed: u64) -> Result<PhotonStream> {
        self.validate()?;
        let with_dark = add_dark_counts(stream, self.dark_count_rate, seed)?;
        let gated = apply_dead_time(&with_dark, self.dead_time)?;
        apply_jitter(&gated, self.jitter_rms, seed)
    }
}

/// Non-paralyzable dead time: keep an event iff it is at least `dead_time`
/// after the last kept event. A gap of exactly `dead_time` is kept.
pub fn apply_dead_time(stream: &PhotonStream, dead_time: f64) -> Result<PhotonStream> {
    if !(dead_time >= 0.0 && dead_time.is_finite()) {
        return Err(Error::param("dead_time", format!("must be nonnegative, got {dead_time}")));
    }
    if dead_time == 0.0 {
        return Ok(stream.clone());
    }
    let mut kept = Vec::with_capacity(stream.len());
    let mut last = f64::NEG_INFINITY;
    for &t in stream.timestamps() {
        if t - last >= dead_time {
            kept.push(t);
            last = t;
        }
    }
    Ok(PhotonStream::from_sorted_unchecked(kept, stream.channel(), stream.span()))
}

/// Adds i.i.d. Gaussian timing offsets and re-sorts. The span grows to
/// cover any event pushed past its edges.
pub fn apply_jitter(stream: &PhotonStream, jitter_rms: f64, seed: u64) -> Result<PhotonStream> {
    if !(jitter_rms >= 0.0 && jitter_rms.is_finite()) {
        return Err(Error::param("jitter_rms", format!("must be nonnegative, got {jitter_rms}")));
    }
    if jitter_rms == 0.0 || stream.is_empty() {
        return Ok(stream.clone());
    }
    let mut rng = derived_rng(seed, tag::JITTER, u64::from(stream.channel()));
    let ts: Vec<f64> = stream
        .timestamps()
        .iter()
        .map(|t| {
            let z: f64 = rng.sample(StandardNormal);
            t + jitter_rms * z
        })
        .collect();
    let (mut start, mut end) = stream.span();
    for t in &ts {
        start = start.min(*t);
        end = end.max(*t);
    }
    Ok(stream_from_unsorted(ts, stream.channel(), (start, end)))
}

/// Routes each event to channel 1 with probability `p_transmit`, else to
/// channel 2.
pub fn beam_split(
    stream: &PhotonStream,
    p_transmit: f64,
    seed: u64,
) -> Result<(PhotonStream, PhotonStream)> {
    if !(0.0..=1.0).contains(&p_transmit) {
        return Err(Error::param(
            "p_transmit",
            format!("must lie in [0, 1], got {p_transmit}"),
        ));
    }
    let mut rng = derived_rng(seed, tag::SPLIT, u64::from(stream.channel()));
    let mut a = Vec::with_capacity(stream.len() / 2 + 1);
    let mut b = Vec::with_capacity(stream.len() / 2 + 1);
    for &t in stream.timestamps() {
        if rng.random::<f64>() < p_transmit {
            a.push(t);
        } else {
            b.push(t);
        }
    }
    Ok((
        PhotonStream::from_sorted_unchecked(a, 1, stream.span()),
        PhotonStream::from_sorted_unchecked(b, 2, stream.span()),
    ))
}
