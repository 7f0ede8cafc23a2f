//! End-to-end runs: config, synthesis, detection, estimators, outputs.

pub mod calibrate;
pub mod config;
pub mod pipeline;
pub mod presets;
pub mod table1;

pub use calibrate::{calibrate, modulation_peak, solve_v_pp, Calibration};
pub use config::{CoincidenceConfig, ExperimentConfig, G2mSource, Table1Config, Table1Mode};
pub use pipeline::{
    efficiency_for_rate, hbt_branch, run_experiment, simulate, synthesize, window_branch, write_atomic, HbtResult,
    RunReport, Summary, TraceSummary, WindowResult,
};
pub use table1::{run_table1, table1_row, Table1, Table1Cell, Table1Row};
