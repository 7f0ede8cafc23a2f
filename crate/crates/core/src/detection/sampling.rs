//! Inhomogeneous Poisson sampling of photon arrivals by thinning.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use super::stream::{stream_from_unsorted, PhotonStream};
use crate::error::{Error, Result};
use crate::light::IntensityTrace;
use crate::rng::{derived_rng, tag};

/// Samples per thinning chunk; each chunk uses its own envelope and RNG.
pub const THINNING_CHUNK: usize = 1 << 16;

/// Arrivals with rate `efficiency * I(t)`, the trace held piecewise constant.
///
/// Candidates are drawn at the chunk's peak rate and accepted with
/// probability `I(t) / max I`. Chunks draw from independent derived seeds,
/// so the parallel result equals the sequential one exactly.
pub fn sample_arrivals(trace: &IntensityTrace, efficiency: f64, seed: u64) -> Result<PhotonStream> {
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(Error::param(
            "efficiency",
            format!("must lie in [0, 1], got {efficiency}"),
        ));
    }
    if trace.is_empty() {
        return Err(Error::Invariant("cannot sample an empty trace".into()));
    }
    let samples = trace.samples();
    let dt = trace.dt();
    let origin = trace.origin();
    let n_chunks = samples.len().div_ceil(THINNING_CHUNK);

    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * THINNING_CHUNK;
            let hi = (lo + THINNING_CHUNK).min(samples.len());
            thin_chunk(&samples[lo..hi], lo, dt, origin, efficiency, seed, c as u64)
        })
        .collect();

    let mut timestamps = Vec::with_capacity(chunks.iter().map(Vec::len).sum());
    for chunk in chunks {
        for t in chunk {
            if timestamps.last().is_none_or(|last| t > *last) {
                timestamps.push(t);
            }
        }
    }
    Ok(PhotonStream::from_sorted_unchecked(
        timestamps,
        0,
        (origin, trace.end()),
    ))
}

fn thin_chunk(
    samples: &[f64],
    first_index: usize,
    dt: f64,
    origin: f64,
    efficiency: f64,
    seed: u64,
    chunk: u64,
) -> Vec<f64> {
    let peak = samples.iter().copied().fold(0.0, f64::max);
    let envelope = efficiency * peak;
    if envelope <= 0.0 {
        return Vec::new();
    }
    let mut rng = derived_rng(seed, tag::ARRIVALS, chunk);
    let chunk_len = samples.len() as f64 * dt;
    let base = origin + first_index as f64 * dt;
    let chunk_end = origin + (first_index + samples.len()) as f64 * dt;
    let mut out = Vec::with_capacity((envelope * chunk_len * 1.2) as usize + 8);
    let mut local = 0.0;
    loop {
        let gap: f64 = rng.sample(Exp1);
        local += gap / envelope;
        if local >= chunk_len {
            break;
        }
        let k = ((local / dt) as usize).min(samples.len() - 1);
        let accept: f64 = rng.random();
        if accept * peak < samples[k] {
            let t = base + local;
            if t < chunk_end {
                out.push(t);
            }
        }
    }
    out
}

/// Merges a homogeneous dark-count process into a stream.
pub fn add_dark_counts(stream: &PhotonStream, rate: f64, seed: u64) -> Result<PhotonStream> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::param("dark_count_rate", format!("must be nonnegative, got {rate}")));
    }
    if rate == 0.0 {
        return Ok(stream.clone());
    }
    let (start, end) = stream.span();
    let mut rng = derived_rng(seed, tag::DARK, u64::from(stream.channel()));
    let mut ts = stream.timestamps().to_vec();
    let mut t = start;
    loop {
        let gap: f64 = rng.sample(Exp1);
        t += gap / rate;
        if t >= end {
            break;
        }
        ts.push(t);
    }
    Ok(stream_from_unsorted(ts, stream.channel(), stream.span()))
}
