//! Time-tag files.
//!
//! Text: optional `#` header lines (`# channel: N`, `# span_ps: START END`)
//! followed by one integer picosecond timestamp per line.
//!
//! Binary (little-endian): `"SBTT"`, version u32, channel u16, count u64,
//! then `count` u64 picosecond timestamps.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::stream::PhotonStream;
use crate::error::{Error, Result};

pub const TIMETAG_MAGIC: &[u8; 4] = b"SBTT";
pub const TIMETAG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimetagFormat {
    Text,
    Binary,
}

pub fn seconds_to_ps(t: f64) -> Result<u64> {
    let ps = (t * 1e12).round();
    if !(ps >= 0.0 && ps < u64::MAX as f64) {
        return Err(Error::param(
            "timestamp",
            format!("{t} s is not representable as unsigned picoseconds"),
        ));
    }
    Ok(ps as u64)
}

pub fn ps_to_seconds(ps: u64) -> f64 {
    ps as f64 / 1e12
}

impl PhotonStream {
    /// Builds a stream from integer picosecond tags.
    pub fn from_picoseconds(ps: &[u64], channel: u16, span_ps: Option<(u64, u64)>) -> Result<Self> {
        let ts: Vec<f64> = ps.iter().map(|&p| ps_to_seconds(p)).collect();
        let span = match span_ps {
            Some((a, b)) => (ps_to_seconds(a), ps_to_seconds(b)),
            None => match (ts.first(), ts.last()) {
                (Some(a), Some(b)) => (*a, *b),
                _ => (0.0, 0.0),
            },
        };
        PhotonStream::new(ts, channel, span)
    }

    pub fn to_picoseconds(&self) -> Result<Vec<u64>> {
        let ps = self
            .timestamps()
            .iter()
            .map(|t| seconds_to_ps(*t))
            .collect::<Result<Vec<u64>>>()?;
        if let Some(i) = ps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Invariant(format!(
                "events {} and {} collide at picosecond resolution",
                i,
                i + 1
            )));
        }
        Ok(ps)
    }
}

pub fn write_timetags(stream: &PhotonStream, path: &Path, format: TimetagFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        TimetagFormat::Text => write_text(stream, &mut w)?,
        TimetagFormat::Binary => write_binary(stream, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn read_timetags(path: &Path, format: TimetagFormat) -> Result<PhotonStream> {
    let f = File::open(path)?;
    match format {
        TimetagFormat::Text => read_text(BufReader::new(f), path),
        TimetagFormat::Binary => read_binary(&mut BufReader::new(f)).map_err(|e| match e {
            Error::Format { reason, .. } => Error::Format {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        }),
    }
}

pub fn write_text<W: Write>(stream: &PhotonStream, w: &mut W) -> Result<()> {
    let ps = stream.to_picoseconds()?;
    let (a, b) = stream.span();
    writeln!(w, "# channel: {}", stream.channel())?;
    writeln!(w, "# span_ps: {} {}", seconds_to_ps(a)?, seconds_to_ps(b)?)?;
    for p in ps {
        writeln!(w, "{p}")?;
    }
    Ok(())
}

pub fn read_text<R: BufRead>(r: R, path: &Path) -> Result<PhotonStream> {
    let err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut channel = 0u16;
    let mut span_ps = None;
    let mut ps: Vec<u64> = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let header = header.trim();
            if let Some(v) = header.strip_prefix("channel:") {
                channel = v
                    .trim()
                    .parse()
                    .map_err(|e| err(lineno, format!("bad channel: {e}")))?;
            } else if let Some(v) = header.strip_prefix("span_ps:") {
                let parts: Vec<&str> = v.split_whitespace().collect();
                if parts.len() != 2 {
                    return Err(err(lineno, "span_ps needs two integers".into()));
                }
                let a = parts[0]
                    .parse()
                    .map_err(|e| err(lineno, format!("bad span start: {e}")))?;
                let b = parts[1]
                    .parse()
                    .map_err(|e| err(lineno, format!("bad span end: {e}")))?;
                span_ps = Some((a, b));
            }
            continue;
        }
        let value: u64 = line
            .parse()
            .map_err(|e| err(lineno, format!("expected an integer picosecond timestamp: {e}")))?;
        if let Some(prev) = ps.last() {
            if value <= *prev {
                return Err(err(
                    lineno,
                    format!("timestamp {value} ps does not increase (previous {prev} ps)"),
                ));
            }
        }
        ps.push(value);
    }
    if let (Some((a, b)), Some(first), Some(last)) = (span_ps, ps.first(), ps.last()) {
        if *first < a || *last > b {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("timestamps lie outside the declared span {a}..{b} ps"),
            });
        }
    }
    PhotonStream::from_picoseconds(&ps, channel, span_ps)
}

pub fn write_binary<W: Write>(stream: &PhotonStream, w: &mut W) -> Result<()> {
    let ps = stream.to_picoseconds()?;
    w.write_all(TIMETAG_MAGIC)?;
    w.write_all(&TIMETAG_FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&stream.channel().to_le_bytes())?;
    w.write_all(&(ps.len() as u64).to_le_bytes())?;
    for p in ps {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(r: &mut R) -> Result<PhotonStream> {
    let fmt = |reason: String| Error::Format {
        path: Default::default(),
        reason,
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TIMETAG_MAGIC {
        return Err(fmt("bad magic, expected SBTT".into()));
    }
    let mut b2 = [0u8; 2];
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != TIMETAG_FORMAT_VERSION {
        return Err(fmt(format!("unsupported version {version}")));
    }
    r.read_exact(&mut b2)?;
    let channel = u16::from_le_bytes(b2);
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    let mut ps = Vec::with_capacity(count.min(1 << 28));
    for i in 0..count {
        r.read_exact(&mut b8)
            .map_err(|_| fmt("file shorter than its declared event count".into()))?;
        let v = u64::from_le_bytes(b8);
        if let Some(prev) = ps.last() {
            if v <= *prev {
                return Err(fmt(format!("event {i}: timestamp {v} ps does not increase")));
            }
        }
        ps.push(v);
    }
    PhotonStream::from_picoseconds(&ps, channel, None)
}
