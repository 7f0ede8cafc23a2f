//! Ready-made configurations.

use std::f64::consts::PI;

use super::config::{CoincidenceConfig, ExperimentConfig, Table1Config};
use crate::detection::DetectorParams;
use crate::light::{CorrelationShape, MixModel, MixParams, ModulationParams, SpeckleParams};
use crate::stats::{Normalization, WindowTiling};

/// Groundglass intensity correlation time of the reference setup.
pub const TAU_G: f64 = 4.63e-6;
/// Modulator drive correlation time of the reference setup.
pub const TAU_M: f64 = 1.28e-6;
pub const WINDOW: f64 = 5e-6;
pub const N_WINDOWS: u64 = 100_000;
/// Coherent fraction giving `g2 = 1.89` under field-level mixing.
pub const EPS_1_89: f64 = 0.331_662_479_035_539_9;
pub const DEFAULT_V_PI: f64 = 10.0;
pub const DEFAULT_BIAS: f64 = PI / 8.0;

fn base(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        seed: 20_240_601,
        duration: WINDOW * N_WINDOWS as f64,
        dt: TAU_G / 10.0,
        speckle: SpeckleParams {
            coherence_time: TAU_G,
            mean_intensity: 1e7,
            shape: CorrelationShape::Gaussian,
        },
        modulation: None,
        mix: MixParams::default(),
        detector: DetectorParams::default(),
        mean_rate_target: 0.1 / WINDOW,
        window: WINDOW,
        n_windows: N_WINDOWS,
        tiling: WindowTiling::Contiguous,
        coincidence: CoincidenceConfig {
            bin: 50e-9,
            max_lag: 20e-6,
            hbt_rate: Some(2e5),
            ..CoincidenceConfig::default()
        },
        table1: Table1Config::default(),
        output_dir: None,
    }
}

/// Pseudothermal light with the unscattered background that brings
/// `g2(0)` to 1.89; reference timescale, 100k windows of 5 us.
pub fn pseudothermal() -> ExperimentConfig {
    let mut c = base("pseudothermal");
    c.mix = MixParams {
        coherent_fraction: EPS_1_89,
        model: MixModel::Field,
    };
    c
}

/// Pure speckle times modulation at the reference timescales, no
/// background. `v_pp` puts the modulation factor near 1.44.
pub fn two_timescale() -> ExperimentConfig {
    let mut c = base("two-timescale");
    c.dt = TAU_M / 10.0;
    c.modulation = Some(ModulationParams {
        correlation_time: TAU_M,
        v_pp: 6.0,
        v_pi: DEFAULT_V_PI,
        bias_phase: DEFAULT_BIAS,
        shape: CorrelationShape::Gaussian,
    });
    c.coincidence.hbt_rate = Some(2e5);
    c
}

/// Starting point for the calibrated ladder of sources.
///
/// Both correlation times are ten times the reference values, so the
/// 5 us counting window stays short against the modulation. `v_pp` is set
/// by calibration.
pub fn table1_base() -> ExperimentConfig {
    let mut c = base("table1");
    c.speckle.coherence_time = 10.0 * TAU_G;
    c.dt = TAU_M;
    c.mix = MixParams {
        coherent_fraction: EPS_1_89,
        model: MixModel::Field,
    };
    c.modulation = Some(ModulationParams {
        correlation_time: 10.0 * TAU_M,
        v_pp: 0.0,
        v_pi: DEFAULT_V_PI,
        bias_phase: DEFAULT_BIAS,
        shape: CorrelationShape::Gaussian,
    });
    c.coincidence = CoincidenceConfig {
        bin: 1e-6,
        max_lag: 200e-6,
        normalization: Normalization::Accidental,
        hbt_rate: Some(2e5),
        ..CoincidenceConfig::default()
    };
    c
}

/// Reference ladder of `g2_m` targets with increasing modulation depth.
pub const TABLE1_TARGETS: [f64; 4] = [1.89, 2.38, 2.80, 3.12];
