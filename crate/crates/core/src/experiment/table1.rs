//! `g2_m` from the beam-splitter branch next to `g2_c` at several mean
//! photon numbers per window.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Table1Mode};
use super::pipeline::{hbt_branch, synthesize, window_branch};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, tag};
use crate::stats::G2Estimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Cell {
    pub mean_target: f64,
    pub mean_n: f64,
    pub g2_c: G2Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub name: String,
    pub seed: u64,
    pub trace_g2: f64,
    pub g2_m: G2Estimate,
    pub g2_c: Vec<Table1Cell>,
}

impl Table1Row {
    /// `|g2_c - g2_m| <= max(floor, sigmas * combined stderr)` per column.
    pub fn consistent(&self, floor: f64, sigmas: f64) -> Vec<bool> {
        self.g2_c
            .iter()
            .map(|c| {
                let diff = (c.g2_c.value - self.g2_m.value).abs();
                let combined = c.g2_c.stderr.hypot(self.g2_m.stderr);
                diff <= floor.max(sigmas * combined)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub mode: Table1Mode,
    pub mean_counts: Vec<f64>,
    pub rows: Vec<Table1Row>,
}

impl Table1 {
    /// Aligned plain-text rendering, one row per config.
    pub fn to_text(&self) -> String {
        let mut header = vec!["config".to_string(), "g2_m(HBT)".to_string()];
        header.extend(self.mean_counts.iter().map(|n| format!("g2_c({n})")));
        let mut rows: Vec<Vec<String>> = vec![header];
        for r in &self.rows {
            let mut cells = vec![r.name.clone(), fmt_est(r.g2_m)];
            cells.extend(r.g2_c.iter().map(|c| fmt_est(c.g2_c)));
            rows.push(cells);
        }
        let cols = rows[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in rows {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (cell, w))| if j == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

fn fmt_est(e: G2Estimate) -> String {
    format!("{:.3}±{:.3}", e.value, e.stderr)
}

/// Runs every config (concurrently, up to the ambient rayon pool size).
///
/// All configs must share the list of mean counts and the mode.
pub fn run_table1(configs: &[ExperimentConfig]) -> Result<Table1> {
    let first = configs
        .first()
        .ok_or_else(|| Error::param("configs", "table needs at least one config"))?;
    for c in configs {
        c.validate()?;
        if c.table1 != first.table1 {
            return Err(Error::Incompatible(format!(
                "config `{}` lists different table1 settings from `{}`",
                c.name, first.name
            )));
        }
        if !c.coincidence.enabled {
            return Err(Error::param("coincidence.enabled", "the table needs the beam-splitter branch"));
        }
    }
    let rows = configs
        .par_iter()
        .map(table1_row)
        .collect::<Result<Vec<_>>>()?;
    Ok(Table1 {
        mode: first.table1.mode,
        mean_counts: first.table1.mean_counts.clone(),
        rows,
    })
}

pub fn table1_row(cfg: &ExperimentConfig) -> Result<Table1Row> {
    let trace = synthesize(cfg, cfg.seed)?;
    let trace_g2 = trace.g2_zero()?;
    let g2_m = hbt_branch(cfg, &trace)?.g2_m;
    let g2_c = cfg
        .table1
        .mean_counts
        .iter()
        .enumerate()
        .map(|(i, &mean)| {
            let rate = mean / cfg.window;
            let level = i as u64;
            let w = match cfg.table1.mode {
                Table1Mode::Rescale => window_branch(cfg, &trace, rate, level)?,
                Table1Mode::Separate => {
                    let fresh = synthesize(cfg, derive_seed(cfg.seed, tag::RUN, level))?;
                    window_branch(cfg, &fresh, rate, level)?
                }
            };
            Ok(Table1Cell {
                mean_target: mean,
                mean_n: w.mean_n,
                g2_c: w.g2_c,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table1Row {
        name: cfg.name.clone(),
        seed: cfg.seed,
        trace_g2,
        g2_m,
        g2_c,
    })
}
