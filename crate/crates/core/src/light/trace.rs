use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const TRACE_MAGIC: &[u8; 4] = b"SBIT";
pub const TRACE_FORMAT_VERSION: u32 = 1;
pub const TRACE_CSV_HEADER: &str = "t_seconds,intensity_hz";

/// A uniformly sampled, nonnegative intensity record in photons/second.
///
/// Sample `k` holds the intensity on `[origin + k*dt, origin + (k+1)*dt)`;
/// detection treats the trace as piecewise constant.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityTrace {
    dt: f64,
    origin: f64,
    samples: Vec<f64>,
}

impl IntensityTrace {
    pub fn new(dt: f64, origin: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Invariant(format!("trace dt must be positive, got {dt}")));
        }
        if !origin.is_finite() {
            return Err(Error::Invariant("trace origin must be finite".into()));
        }
        if samples.is_empty() {
            return Err(Error::Invariant("trace must hold at least one sample".into()));
        }
        if let Some((k, v)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::Invariant(format!(
                "trace sample {k} is {v}; intensities must be finite and nonnegative"
            )));
        }
        Ok(IntensityTrace { dt, origin, samples })
    }

    pub fn constant(value: f64, dt: f64, len: usize) -> Result<Self> {
        Self::new(dt, 0.0, vec![value; len])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    pub fn end(&self) -> f64 {
        self.origin + self.duration()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Integral of the intensity over the whole trace (photons).
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.dt
    }

    /// Sample estimate of `<I^2>/<I>^2`.
    pub fn g2_zero(&self) -> Result<f64> {
        let (m1, m2) = moments(&self.samples);
        if m1 <= 0.0 {
            return Err(Error::Undefined("g2 of an all-zero trace".into()));
        }
        Ok(m2 / (m1 * m1))
    }

    /// `<I^2>/<I>^2` with a batch-means standard error.
    ///
    /// Samples are correlated over the coherence time, so the variance is
    /// taken across `n_batches` contiguous blocks; each block should be many
    /// coherence times long.
    pub fn g2_zero_with_stderr(&self, n_batches: usize) -> Result<(f64, f64)> {
        let g2 = self.g2_zero()?;
        let n_batches = n_batches.max(2).min(self.samples.len());
        let block = self.samples.len() / n_batches;
        if block == 0 {
            return Err(Error::Undefined("trace too short for batch means".into()));
        }
        let (m1, m2) = moments(&self.samples[..block * n_batches]);
        // Linearized ratio: per-block value of I^2/m1^2 - 2 g2 I/m1.
        let g_all = m2 / (m1 * m1);
        let batch_vals: Vec<f64> = self.samples[..block * n_batches]
            .chunks_exact(block)
            .map(|c| {
                let (b1, b2) = moments(c);
                b2 / (m1 * m1) - 2.0 * g_all * b1 / m1
            })
            .collect();
        let mean = batch_vals.iter().sum::<f64>() / n_batches as f64;
        let var = batch_vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (n_batches - 1) as f64;
        Ok((g2, (var / n_batches as f64).sqrt()))
    }

    /// Normalized intensity autocorrelation `<I(t)I(t+lag)>/<I>^2` at an
    /// integer sample lag.
    pub fn autocorrelation(&self, lag: usize) -> Result<f64> {
        let n = self.samples.len();
        if lag >= n {
            return Err(Error::param("lag", format!("{lag} exceeds trace length {n}")));
        }
        let m1 = self.mean();
        if m1 <= 0.0 {
            return Err(Error::Undefined("autocorrelation of an all-zero trace".into()));
        }
        let s: f64 = self.samples[..n - lag]
            .iter()
            .zip(&self.samples[lag..])
            .map(|(a, b)| a * b)
            .sum();
        Ok(s / (n - lag) as f64 / (m1 * m1))
    }

    /// Scales every sample; `factor` must be nonnegative.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::param("factor", format!("must be nonnegative, got {factor}")));
        }
        Self::new(
            self.dt,
            self.origin,
            self.samples.iter().map(|v| v * factor).collect(),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for (k, v) in self.samples.iter().enumerate() {
            writeln!(w, "{},{}", self.origin + k as f64 * self.dt, v)?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let parse_err = |line: usize, reason: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let reader = BufReader::new(File::open(path)?);
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if idx == 0 {
                if line.trim() != TRACE_CSV_HEADER {
                    return Err(parse_err(lineno, format!("expected header `{TRACE_CSV_HEADER}`")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (t, v) = line
                .split_once(',')
                .ok_or_else(|| parse_err(lineno, "expected two comma-separated fields".into()))?;
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|e| parse_err(lineno, format!("bad time: {e}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| parse_err(lineno, format!("bad intensity: {e}")))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(parse_err(lineno, format!("negative or non-finite intensity {v}")));
            }
            times.push(t);
            samples.push(v);
        }
        if samples.is_empty() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: "no samples".into(),
            });
        }
        let origin = times[0];
        let dt = if times.len() > 1 {
            (times[times.len() - 1] - origin) / (times.len() - 1) as f64
        } else {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: "a single-row CSV does not determine dt".into(),
            });
        };
        for (k, t) in times.iter().enumerate() {
            let expected = origin + k as f64 * dt;
            if (t - expected).abs() > 1e-6 * dt {
                return Err(parse_err(k + 2, format!("time {t} breaks the uniform grid")));
            }
        }
        IntensityTrace::new(dt, origin, samples)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_binary_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Layout: `"SBIT"`, version u32, dt f64, count u64, `count` f64 samples;
    /// all little-endian. The origin is not stored.
    pub fn write_binary_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(TRACE_MAGIC)?;
        w.write_all(&TRACE_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for v in &self.samples {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_binary_from(&mut r).map_err(|e| match e {
            Error::Format { reason, .. } => Error::Format {
                path: path.to_path_buf(),
                reason,
            },
            Error::Invariant(reason) => Error::Format {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn read_binary_from<R: Read>(r: &mut R) -> Result<Self> {
        let fmt = |reason: &str| Error::Format {
            path: Default::default(),
            reason: reason.to_string(),
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != TRACE_MAGIC {
            return Err(fmt("bad magic, expected SBIT"));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != TRACE_FORMAT_VERSION {
            return Err(fmt(&format!("unsupported version {version}")));
        }
        r.read_exact(&mut b8)?;
        let dt = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        let mut samples = Vec::with_capacity(count.min(1 << 28));
        for _ in 0..count {
            r.read_exact(&mut b8)
                .map_err(|_| fmt("file shorter than its declared sample count"))?;
            samples.push(f64::from_le_bytes(b8));
        }
        IntensityTrace::new(dt, 0.0, samples)
    }
}

pub(crate) fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (s1, s2) = xs
        .iter()
        .fold((0.0, 0.0), |(s1, s2), &x| (s1 + x, s2 + x * x));
    (s1 / n, s2 / n)
}

/// Pointwise product of two traces on the same grid.
///
/// This composes the modulator transmission with the scattered intensity.
pub fn multiply_traces(a: &IntensityTrace, b: &IntensityTrace) -> Result<IntensityTrace> {
    if a.len() != b.len() {
        return Err(Error::Incompatible(format!(
            "trace lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.dt != b.dt {
        return Err(Error::Incompatible(format!(
            "trace sample spacings differ: {} vs {}",
            a.dt, b.dt
        )));
    }
    let samples = a.samples.iter().zip(&b.samples).map(|(x, y)| x * y).collect();
    IntensityTrace::new(a.dt, a.origin, samples)
}
