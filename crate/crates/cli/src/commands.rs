use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use superbunch::detection::timetag::{read_binary, read_text, write_binary, write_text};
use superbunch::detection::{beam_split, sample_arrivals, PhotonStream};
use superbunch::experiment::{
    calibrate as solve_ladder, efficiency_for_rate, presets, run_experiment, run_table1, synthesize, write_atomic,
    ExperimentConfig, Table1,
};
use superbunch::light::IntensityTrace;
use superbunch::rng::{derive_seed, tag};
use superbunch::stats::{
    coincidence_histogram, count_windows, fit_two_timescale, g2_from_histogram, tail_metrics, FitGuess, Law,
};

use crate::{CalibrateArgs, Common, ExportArgs, ExportWhat, Failure, Format, ImportArgs, Preset, RunArgs, Table1Args};

fn preset(p: Preset) -> ExperimentConfig {
    match p {
        Preset::Pseudothermal => presets::pseudothermal(),
        Preset::TwoTimescale => presets::two_timescale(),
        Preset::Table1Base => presets::table1_base(),
    }
}

fn load_config(c: &Common, default: Preset) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => preset(c.preset.unwrap_or(default)),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn require_out(out: &Option<PathBuf>) -> Result<&Path, Failure> {
    let dir = out
        .as_deref()
        .ok_or_else(|| Failure::Config("--out <dir> is required for this command".into()))?;
    fs::create_dir_all(dir)?;
    Ok(dir)
}

fn pretty(v: &Value) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn run(args: RunArgs) -> Result<(), Failure> {
    if args.format == Format::Binary {
        return Err(Failure::Config("run prints csv or json; binary applies to export".into()));
    }
    let cfg = load_config(&args.common, Preset::Pseudothermal)?;
    let report = run_experiment(&cfg)?;
    let summary = report.summary();
    match args.format {
        Format::Json => print!("{}", String::from_utf8_lossy(&pretty(&serde_json::to_value(&summary)?)?)),
        _ => {
            println!("name,{}", summary.name);
            println!("seed,{}", summary.seed);
            println!("trace_g2,{}", summary.trace.g2);
            println!("mean_n,{}", summary.mean_n);
            println!("g2_c,{}", summary.g2_c.value);
            println!("g2_c_stderr,{}", summary.g2_c.stderr);
            if let Some(m) = summary.g2_m {
                println!("g2_m,{}", m.value);
                println!("g2_m_stderr,{}", m.stderr);
            }
        }
    }
    Ok(())
}

fn table_csv(t: &Table1) -> String {
    let mut out = String::from("config,g2_m,g2_m_stderr");
    for n in &t.mean_counts {
        let _ = write!(out, ",g2_c_{n},g2_c_{n}_stderr");
    }
    out.push('\n');
    for r in &t.rows {
        let _ = write!(out, "{},{},{}", r.name, r.g2_m.value, r.g2_m.stderr);
        for c in &r.g2_c {
            let _ = write!(out, ",{},{}", c.g2_c.value, c.g2_c.stderr);
        }
        out.push('\n');
    }
    out
}

pub fn table1(args: Table1Args) -> Result<(), Failure> {
    let mut configs = if args.configs.is_empty() {
        let mut base = presets::table1_base();
        if let Some(seed) = args.seed {
            base.seed = seed;
        }
        let targets = args.targets.unwrap_or_else(|| presets::TABLE1_TARGETS.to_vec());
        solve_ladder(&base, &targets)?.into_iter().map(|c| c.config).collect()
    } else {
        args.configs
            .iter()
            .map(|p| ExperimentConfig::load(p))
            .collect::<Result<Vec<_>, _>>()?
    };
    if let Some(seed) = args.seed {
        for c in &mut configs {
            c.seed = seed;
        }
    }
    let table = run_table1(&configs)?;
    let text = table.to_text();
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        write_atomic(&dir.join("table1.json"), &pretty(&serde_json::to_value(&table)?)?)?;
        write_atomic(&dir.join("table1.txt"), text.as_bytes())?;
    }
    match args.format {
        None => print!("{text}"),
        Some(Format::Csv) => print!("{}", table_csv(&table)),
        Some(Format::Json) => print!("{}", String::from_utf8_lossy(&pretty(&serde_json::to_value(&table)?)?)),
        Some(Format::Binary) => return Err(Failure::Config("table1 has no binary form".into())),
    }
    Ok(())
}

pub fn calibrate(args: CalibrateArgs) -> Result<(), Failure> {
    let mut base = load_config(&args.common, Preset::Table1Base)?;
    base.output_dir = None;
    let targets = args.targets.unwrap_or_else(|| presets::TABLE1_TARGETS.to_vec());
    let cals = solve_ladder(&base, &targets)?;
    let Some(dir) = &args.common.out else {
        print!("{}", String::from_utf8_lossy(&pretty(&serde_json::to_value(&cals)?)?));
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    let mut index = Vec::new();
    for c in &cals {
        let file = format!("{}.toml", c.config.name);
        write_atomic(&dir.join(&file), c.config.to_toml()?.as_bytes())?;
        println!(
            "target {:.3}  eps {:.4}  v_pp {:.4} V  predicted {:.4}  -> {file}",
            c.target_g2, c.coherent_fraction, c.v_pp, c.predicted_g2
        );
        index.push(json!({
            "target_g2": c.target_g2,
            "coherent_fraction": c.coherent_fraction,
            "v_pp": c.v_pp,
            "predicted_g2": c.predicted_g2,
            "config": file,
        }));
    }
    write_atomic(&dir.join("calibration.json"), &pretty(&Value::Array(index))?)?;
    Ok(())
}

fn infer_format(path: &Path, explicit: Option<Format>) -> Format {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => Format::Binary,
        Some("json") => Format::Json,
        _ => Format::Csv,
    })
}

fn tags_json(stream: &PhotonStream) -> Result<Value, Failure> {
    let (start, end) = stream.span();
    Ok(json!({
        "channel": stream.channel(),
        "span_ps": [
            superbunch::detection::timetag::seconds_to_ps(start)?,
            superbunch::detection::timetag::seconds_to_ps(end)?,
        ],
        "timestamps_ps": stream.to_picoseconds()?,
    }))
}

fn tags_from_json(path: &Path, text: &str) -> Result<PhotonStream, Failure> {
    let bad = |reason: &str| Failure::Config(format!("{}: {reason}", path.display()));
    let doc: Value = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
    let channel = doc["channel"]
        .as_u64()
        .and_then(|c| u16::try_from(c).ok())
        .ok_or_else(|| bad("`channel` must be an integer in 0..=65535"))?;
    let ps = doc["timestamps_ps"]
        .as_array()
        .ok_or_else(|| bad("`timestamps_ps` must be an array"))?
        .iter()
        .map(|v| v.as_u64().ok_or_else(|| bad("timestamps must be nonnegative integers")))
        .collect::<Result<Vec<u64>, _>>()?;
    let span = match doc.get("span_ps") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_array().map(|a| a.iter().map(Value::as_u64).collect::<Vec<_>>()).as_deref() {
            Some([Some(a), Some(b)]) => Some((*a, *b)),
            _ => return Err(bad("`span_ps` must be [start, end]")),
        },
    };
    Ok(PhotonStream::from_picoseconds(&ps, channel, span)?)
}

/// Unreadable or malformed input is a usage error, reported with the path.
fn read_tags(path: &Path, format: Format) -> Result<PhotonStream, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let parsed = match format {
        Format::Csv => read_text(bytes.as_slice(), path),
        Format::Binary => read_binary(&mut bytes.as_slice()),
        Format::Json => return tags_from_json(path, &String::from_utf8_lossy(&bytes)),
    };
    parsed.map_err(|e| match e {
        superbunch::Error::Format { reason, .. } => Failure::Config(format!("{}: {reason}", path.display())),
        superbunch::Error::Parse { .. } => Failure::Config(e.to_string()),
        other => Failure::Config(format!("{}: {other}", path.display())),
    })
}

pub fn import(args: ImportArgs) -> Result<(), Failure> {
    let first = &args.paths[0];
    let s1 = read_tags(first, infer_format(first, args.format))?;
    if !(args.window > 0.0 && args.window.is_finite()) {
        return Err(Failure::Config(format!("--window must be positive, got {}", args.window)));
    }
    let n_windows = args
        .n_windows
        .unwrap_or_else(|| (s1.span_length() / args.window).floor() as u64);
    if n_windows == 0 {
        return Err(Failure::Config(format!(
            "{} spans {} s, less than one {} s window",
            first.display(),
            s1.span_length(),
            args.window
        )));
    }
    let hist = count_windows(&s1, args.window, n_windows)?;
    let g2_c = g2_from_histogram(&hist)?;
    let tails = tail_metrics(&hist, Law::Geometric)?;
    let mut summary = json!({
        "path": first.display().to_string(),
        "events": s1.len(),
        "span_seconds": s1.span_length(),
        "rate": s1.rate(),
        "window": args.window,
        "n_windows": n_windows,
        "mean_n": hist.mean(),
        "g2_c": g2_c,
        "tail_metrics": tails,
    });
    let mut correlation = None;
    if let Some(second) = args.paths.get(1) {
        let s2 = read_tags(second, infer_format(second, args.format))?;
        let cf = coincidence_histogram(&s1, &s2, args.bin, args.max_lag)?;
        let (value, stderr) = cf.zero_lag_estimate(1);
        let fit = match fit_two_timescale(&cf, FitGuess::from_curve(&cf)) {
            Ok(f) => serde_json::to_value(f)?,
            Err(e) => json!({ "error": e.to_string() }),
        };
        summary["coincidence"] = json!({
            "path": second.display().to_string(),
            "bin": args.bin,
            "max_lag": args.max_lag,
            "zero_lag": { "value": value, "stderr": stderr },
            "fit": fit,
        });
        correlation = Some(cf);
    }
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        hist.write_csv(&mut buf)?;
        write_atomic(&dir.join("histogram.csv"), &buf)?;
        if let Some(cf) = &correlation {
            buf.clear();
            cf.write_csv(&mut buf)?;
            write_atomic(&dir.join("g2_tau.csv"), &buf)?;
        }
        write_atomic(&dir.join("summary.json"), &pretty(&summary)?)?;
    }
    print!("{}", String::from_utf8_lossy(&pretty(&summary)?));
    Ok(())
}

fn trace_bytes(trace: &IntensityTrace, format: Format) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => trace.write_csv_to(&mut buf)?,
        Format::Binary => trace.write_binary_to(&mut buf)?,
        Format::Json => {
            buf = pretty(&json!({
                "dt": trace.dt(),
                "origin": trace.origin(),
                "intensity_hz": trace.samples(),
            }))?
        }
    }
    Ok(buf)
}

fn tag_bytes(stream: &PhotonStream, format: Format) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_text(stream, &mut buf)?,
        Format::Binary => write_binary(stream, &mut buf)?,
        Format::Json => buf = pretty(&tags_json(stream)?)?,
    }
    Ok(buf)
}

fn extension(what: ExportWhat, format: Format) -> &'static str {
    match (what, format) {
        (_, Format::Binary) => "bin",
        (_, Format::Json) => "json",
        (ExportWhat::Trace, Format::Csv) => "csv",
        (ExportWhat::Tags, Format::Csv) => "txt",
    }
}

pub fn export(args: ExportArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common, Preset::Pseudothermal)?;
    let dir = require_out(&args.common.out)?;
    let ext = extension(args.what, args.format);
    let trace = synthesize(&cfg, cfg.seed)?;
    let mut written = Vec::new();
    match args.what {
        ExportWhat::Trace => {
            let path = dir.join(format!("trace.{ext}"));
            write_atomic(&path, &trace_bytes(&trace, args.format)?)?;
            written.push(path);
        }
        ExportWhat::Tags => {
            // Same stream the HBT branch of `run` sees.
            let seed = derive_seed(cfg.seed, tag::ARRIVALS, 0);
            let rate = if args.channels == 2 { cfg.hbt_rate() } else { cfg.mean_rate_target };
            let arrivals = sample_arrivals(&trace, efficiency_for_rate(&trace, rate)?, seed)?;
            let streams = if args.channels == 2 {
                let (a, b) = beam_split(&arrivals, 0.5, seed)?;
                vec![a, b]
            } else {
                vec![arrivals]
            };
            for s in streams {
                let detected = cfg.detector.detect(&s, seed)?;
                let name = if args.channels == 2 {
                    format!("timetags_ch{}.{ext}", detected.channel())
                } else {
                    format!("timetags.{ext}")
                };
                let path = dir.join(name);
                write_atomic(&path, &tag_bytes(&detected, args.format)?)?;
                written.push(path);
            }
        }
    }
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}
