use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use superbunch::detection::{read_timetags, TimetagFormat};
use superbunch::experiment::{presets, ExperimentConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_superbunch"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn superbunch")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Pseudothermal preset cut down to 20 ms of light.
fn small_config(dir: &Path, name: &str) -> String {
    let mut c: ExperimentConfig = presets::pseudothermal();
    c.name = name.into();
    c.duration = 0.02;
    c.n_windows = 2000;
    c.coincidence.bin = 0.5e-6;
    let file = format!("{name}.toml");
    fs::write(dir.join(&file), c.to_toml().unwrap()).unwrap();
    file
}

fn json_stdout(o: &Output) -> Value {
    assert!(o.status.success(), "{}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn run_is_reproducible_and_writes_all_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "small");
    for out in ["a", "b"] {
        let o = run_in(tmp.path(), &["run", "--config", &cfg, "--out", out, "--format", "json"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["histogram.csv", "g2_tau.csv", "fit.json", "summary.json"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let hist = fs::read_to_string(tmp.path().join("a/histogram.csv")).unwrap();
    assert_eq!(hist.lines().next(), Some("n,count,probability"));
    let g2 = fs::read_to_string(tmp.path().join("a/g2_tau.csv")).unwrap();
    assert_eq!(g2.lines().next(), Some("lag_seconds,g2,stderr"));
}

#[test]
fn seed_flag_overrides_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "small");
    let a = json_stdout(&run_in(tmp.path(), &["run", "--config", &cfg, "--format", "json"]));
    let b = json_stdout(&run_in(tmp.path(), &["run", "--config", &cfg, "--seed", "9", "--format", "json"]));
    assert_eq!(b["seed"], 9);
    assert_ne!(a["g2_c"], b["g2_c"]);
}

#[test]
fn worker_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "small");
    let one = run_in(tmp.path(), &["--workers", "1", "run", "--config", &cfg, "--format", "json"]);
    let four = run_in(tmp.path(), &["run", "--workers", "4", "--config", &cfg, "--format", "json"]);
    assert_eq!(json_stdout(&one), json_stdout(&four));
}

#[test]
fn calibrate_writes_loadable_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["calibrate", "--out", "cal", "--targets", "1.89,2.38,2.80,3.12"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let index: Value = serde_json::from_slice(&fs::read(tmp.path().join("cal/calibration.json")).unwrap()).unwrap();
    let entries = index.as_array().unwrap();
    assert_eq!(entries.len(), 4);
    let mut last_vpp = -1.0;
    for e in entries {
        let target = e["target_g2"].as_f64().unwrap();
        assert!((e["predicted_g2"].as_f64().unwrap() - target).abs() < 1e-9);
        let vpp = e["v_pp"].as_f64().unwrap();
        assert!(vpp > last_vpp);
        last_vpp = vpp;
        let path = tmp.path().join("cal").join(e["config"].as_str().unwrap());
        ExperimentConfig::load(&path).unwrap();
    }
}

#[test]
fn calibrate_rejects_unreachable_target() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["calibrate", "--targets", "1.89,40"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("targets"));
}

#[test]
fn table1_from_config_files() {
    let tmp = tempfile::tempdir().unwrap();
    let a = small_config(tmp.path(), "one");
    let b = small_config(tmp.path(), "two");
    let o = run_in(tmp.path(), &["table1", "--config", &a, "--config", &b, "--out", "t", "--format", "json"]);
    let doc = json_stdout(&o);
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["g2_c"].as_array().unwrap().len(), 3);
    let text = fs::read_to_string(tmp.path().join("t/table1.txt")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("config"));
}

#[test]
fn import_counts_the_example_tags() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("tags.txt"), "0\n1000\n2000\n").unwrap();
    let doc = json_stdout(&run_in(tmp.path(), &["import", "tags.txt", "--window", "1e-9"]));
    assert_eq!(doc["events"], 3);
    assert_eq!(doc["n_windows"], 2);
    assert_eq!(doc["mean_n"], 1.0);
}

#[test]
fn import_names_the_out_of_order_line() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("tags.txt"), "0\n2000\n1000\n").unwrap();
    let o = run_in(tmp.path(), &["import", "tags.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tags.txt:3"), "{}", stderr(&o));
}

#[test]
fn export_import_round_trip_in_every_format() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "small");
    let mut summaries = Vec::new();
    for (fmt, ext) in [("csv", "txt"), ("json", "json"), ("binary", "bin")] {
        let out = format!("ex-{fmt}");
        let o = run_in(
            tmp.path(),
            &["export", "--config", &cfg, "--out", &out, "--format", fmt, "--channels", "2"],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let ch1 = format!("{out}/timetags_ch1.{ext}");
        let ch2 = format!("{out}/timetags_ch2.{ext}");
        let args = ["import", &ch1, &ch2, "--bin", "5e-7"];
        let mut doc = json_stdout(&run_in(tmp.path(), &args));
        doc.as_object_mut().unwrap().remove("path");
        doc["coincidence"].as_object_mut().unwrap().remove("path");
        summaries.push(doc);
    }
    // Text and JSON carry the record span, so everything matches.
    assert_eq!(summaries[0], summaries[1]);
    // Binary has no span field, so windows start at the first tag instead;
    // the tags themselves must survive unchanged.
    assert_eq!(summaries[0]["events"], summaries[2]["events"]);
    for ch in [1, 2] {
        let text = read_timetags(&tmp.path().join(format!("ex-csv/timetags_ch{ch}.txt")), TimetagFormat::Text).unwrap();
        let bin = read_timetags(&tmp.path().join(format!("ex-binary/timetags_ch{ch}.bin")), TimetagFormat::Binary).unwrap();
        assert_eq!(text.timestamps(), bin.timestamps());
        assert_eq!(text.channel(), bin.channel());
    }
    assert!(summaries[0]["events"].as_u64().unwrap() > 1000);
    let g0 = summaries[0]["coincidence"]["zero_lag"]["value"].as_f64().unwrap();
    assert!(g0 > 1.5, "{g0}");
}

#[test]
fn trace_export_has_the_documented_layouts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "small");
    for fmt in ["csv", "binary"] {
        let o = run_in(tmp.path(), &["export", "--config", &cfg, "--what", "trace", "--format", fmt, "--out", "tr"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let csv = fs::read_to_string(tmp.path().join("tr/trace.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t_seconds,intensity_hz"));
    let bin = fs::read(tmp.path().join("tr/trace.bin")).unwrap();
    assert_eq!(&bin[..4], b"SBIT");
    let count = u64::from_le_bytes(bin[16..24].try_into().unwrap());
    assert_eq!(count as usize, csv.lines().count() - 1);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run_in(tmp.path(), args).status.code();
    assert_eq!(code(&["run", "--config", "missing.toml"]), Some(2));
    assert_eq!(code(&["run", "--bogus"]), Some(2));
    assert_eq!(code(&["--workers", "0", "calibrate"]), Some(2));
    assert_eq!(code(&["export", "--preset", "pseudothermal"]), Some(2));
    fs::write(tmp.path().join("bad.toml"), "seed = \"x\"\n").unwrap();
    assert_eq!(code(&["run", "--config", "bad.toml"]), Some(2));
    // A record with no photons leaves g2 undefined: a runtime failure.
    fs::write(tmp.path().join("empty.txt"), "# channel: 1\n# span_ps: 0 1000000\n").unwrap();
    assert_eq!(code(&["import", "empty.txt", "--window", "1e-7"]), Some(3));
}
