//! Maps target `g2(0)` values onto simulation parameters.
//!
//! The coherent fraction is fixed by the first (unmodulated) target through
//! the field mixing law; each further target sets the drive amplitude so
//! that the analytic modulation factor equals `target / g2_mix`. Independent
//! modulation and speckle multiply at zero lag.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::light::{MixParams, ModulationParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target_g2: f64,
    pub coherent_fraction: f64,
    pub v_pp: f64,
    /// Analytic `g2(0)` of the calibrated source.
    pub predicted_g2: f64,
    pub config: ExperimentConfig,
}

const SCAN_STEPS: usize = 4000;

/// Drive amplitude at which the analytic modulation `g2(0)` peaks, and that
/// peak. `g2` rises monotonically from 1 up to it.
pub fn modulation_peak(template: &ModulationParams) -> Result<(f64, f64)> {
    let g = |v_pp: f64| ModulationParams { v_pp, ..*template }.g2_zero();
    // At v_pp = 12 v_pi the drive phase spans many fringes; the peak lies well below.
    let v_max = 12.0 * template.v_pi;
    let mut best = (0.0, g(0.0)?);
    for i in 1..=SCAN_STEPS {
        let v = v_max * i as f64 / SCAN_STEPS as f64;
        let gv = g(v)?;
        if gv > best.1 {
            best = (v, gv);
        } else {
            break;
        }
    }
    Ok(best)
}

/// Smallest `v_pp` whose analytic modulation `g2(0)` equals `target`.
pub fn solve_v_pp(template: &ModulationParams, target: f64) -> Result<f64> {
    let g = |v_pp: f64| ModulationParams { v_pp, ..*template }.g2_zero();
    let base = g(0.0)?;
    if (target - base).abs() <= 1e-12 * base {
        return Ok(0.0);
    }
    if target < base {
        return Err(Error::param(
            "targets",
            format!("modulation g2 {target} lies below the unmodulated value {base}"),
        ));
    }
    let (v_peak, g_peak) = modulation_peak(template)?;
    if target > g_peak {
        return Err(Error::param(
            "targets",
            format!(
                "modulation g2 {target} exceeds the maximum {g_peak:.4} reachable at bias {} rad",
                template.bias_phase
            ),
        ));
    }
    let (mut lo, mut hi) = (0.0, v_peak);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One calibrated config per target, named `<base>-g<target>`.
pub fn calibrate(base: &ExperimentConfig, targets: &[f64]) -> Result<Vec<Calibration>> {
    if targets.is_empty() {
        return Err(Error::param("targets", "need at least one target"));
    }
    let template = base.modulation.ok_or_else(|| {
        Error::param("modulation", "calibration needs a modulation section to set v_pi, bias and timescale")
    })?;
    let mix = MixParams::for_target_g2(base.mix.model, targets[0])?;
    let g2_mix = mix.g2_zero();
    targets
        .iter()
        .map(|&target| {
            let v_pp = solve_v_pp(&template, target / g2_mix)?;
            let modulation = ModulationParams { v_pp, ..template };
            let mut config = base.clone();
            config.name = format!("{}-g{target:.2}", base.name);
            config.mix = mix;
            config.modulation = Some(modulation);
            config.validate()?;
            Ok(Calibration {
                target_g2: target,
                coherent_fraction: mix.coherent_fraction,
                v_pp,
                predicted_g2: g2_mix * modulation.g2_zero()?,
                config,
            })
        })
        .collect()
}
