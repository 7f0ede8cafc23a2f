use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::speckle::SpeckleField;
use super::trace::IntensityTrace;
use crate::error::{Error, Result};
use crate::rng::{derived_rng, tag};

/// How unscattered laser light combines with the speckle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixModel {
    /// `|alpha + E|^2`: the unscattered beam adds coherently to the field.
    #[default]
    Field,
    /// `|alpha|^2 + |E|^2`: incoherent intensity addition.
    Intensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MixParams {
    /// Fraction of the mean intensity carried by the coherent component.
    pub coherent_fraction: f64,
    #[serde(default)]
    pub model: MixModel,
}

impl MixParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.coherent_fraction) {
            return Err(Error::param(
                "mix.coherent_fraction",
                format!("must lie in [0, 1], got {}", self.coherent_fraction),
            ));
        }
        Ok(())
    }

    /// `g2(0)` of the mixture for a thermal speckle component.
    pub fn g2_zero(&self) -> f64 {
        let e = self.coherent_fraction;
        match self.model {
            MixModel::Field => 2.0 - e * e,
            MixModel::Intensity => 1.0 + (1.0 - e) * (1.0 - e),
        }
    }

    /// `g2(t)` of the mixture given the speckle field correlation `|gamma(t)|`.
    ///
    /// Field-level mixing keeps a beat term linear in `gamma`:
    /// `1 + 2 e (1 - e) gamma + (1 - e)^2 gamma^2`.
    pub fn g2_for_field_correlation(&self, gamma: f64) -> f64 {
        let e = self.coherent_fraction;
        let speckle = (1.0 - e) * (1.0 - e) * gamma * gamma;
        match self.model {
            MixModel::Field => 1.0 + 2.0 * e * (1.0 - e) * gamma + speckle,
            MixModel::Intensity => 1.0 + speckle,
        }
    }

    /// Coherent fraction that produces a given `g2(0)` under `model`.
    pub fn for_target_g2(model: MixModel, g2: f64) -> Result<Self> {
        if !(1.0..=2.0).contains(&g2) {
            return Err(Error::param(
                "target_g2",
                format!("a thermal/coherent mixture reaches g2 in [1, 2], got {g2}"),
            ));
        }
        let coherent_fraction = match model {
            MixModel::Field => (2.0 - g2).sqrt(),
            MixModel::Intensity => 1.0 - (g2 - 1.0).sqrt(),
        };
        Ok(MixParams {
            coherent_fraction,
            model,
        })
    }
}

/// Adds an unscattered coherent component to a speckle field.
///
/// `|alpha|^2 = eps * <|E|^2>` (sample mean), the speckle part is scaled by
/// `1 - eps`, so the mean intensity is preserved. The laser phase of `alpha`
/// is drawn from `seed`; it does not affect statistics of a circular field.
pub fn mix_coherent_background(
    speckle: &SpeckleField,
    params: &MixParams,
    seed: u64,
) -> Result<IntensityTrace> {
    params.validate()?;
    if speckle.is_empty() {
        return Err(Error::Invariant("empty speckle field".into()));
    }
    let eps = params.coherent_fraction;
    let field = speckle.amplitudes();
    let mean = field.iter().map(|e| e.norm_sqr()).sum::<f64>() / field.len() as f64;
    let background = eps * mean;
    let scale = (1.0 - eps).sqrt();
    let samples: Vec<f64> = match params.model {
        MixModel::Field => {
            let mut rng = derived_rng(seed, tag::LASER_PHASE, 0);
            let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let alpha = Complex64::from_polar(background.sqrt(), phase);
            field.iter().map(|e| (alpha + scale * e).norm_sqr()).collect()
        }
        MixModel::Intensity => field
            .iter()
            .map(|e| background + (1.0 - eps) * e.norm_sqr())
            .collect(),
    };
    IntensityTrace::new(speckle.dt(), speckle.origin(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::light::gaussian_process::CorrelationShape;
    use crate::light::speckle::{gen_speckle_field, SpeckleParams};
    use crate::rng::rng_from_seed;
    use rand_distr::StandardNormal;

    fn field() -> SpeckleField {
        let p = SpeckleParams {
            coherence_time: 1.0,
            mean_intensity: 1e5,
            shape: CorrelationShape::Gaussian,
        };
        gen_speckle_field(&p, 40_000.0, 0.1, 21).unwrap()
    }

    // Monte Carlo oracle: i.i.d. circular Gaussian samples plus a constant.
    fn mc_g2(eps: f64, n: usize, seed: u64) -> f64 {
        let mut rng = rng_from_seed(seed);
        let alpha = eps.sqrt();
        let s = ((1.0 - eps) / 2.0).sqrt();
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let i = (alpha + s * re).powi(2) + (s * im).powi(2);
            m1 += i;
            m2 += i * i;
        }
        m1 /= n as f64;
        m2 /= n as f64;
        m2 / (m1 * m1)
    }

    #[test]
    fn field_mixing_law_matches_monte_carlo() {
        for eps in [0.0, 0.2, 0.33, 0.6, 0.9] {
            let mc = mc_g2(eps, 2_000_000, 99);
            let law = 2.0 - eps * eps;
            assert!((mc - law).abs() < 0.01, "eps {eps}: mc {mc} law {law}");
        }
    }

    #[test]
    fn fraction_for_1_89() {
        let p = MixParams::for_target_g2(MixModel::Field, 1.89).unwrap();
        assert!((p.coherent_fraction - 0.11f64.sqrt()).abs() < 1e-15);
        assert!((mc_g2(p.coherent_fraction, 2_000_000, 5) - 1.89).abs() < 0.01);
        let q = MixParams::for_target_g2(MixModel::Intensity, 1.89).unwrap();
        assert!((q.g2_zero() - 1.89).abs() < 1e-12);
        assert!(MixParams::for_target_g2(MixModel::Field, 2.5).is_err());
    }

    #[test]
    fn pure_speckle_and_pure_coherent_limits() {
        let f = field();
        let none = MixParams {
            coherent_fraction: 0.0,
            model: MixModel::Field,
        };
        let t = mix_coherent_background(&f, &none, 1).unwrap();
        assert!((t.g2_zero().unwrap() - 2.0).abs() < 0.05);

        let all = MixParams {
            coherent_fraction: 1.0,
            model: MixModel::Field,
        };
        let t = mix_coherent_background(&f, &all, 1).unwrap();
        let first = t.samples()[0];
        assert!(t.samples().iter().all(|v| (v - first).abs() <= 1e-9 * first));
        assert!((t.g2_zero().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mixing_preserves_mean_and_hits_law() {
        let f = field();
        let base = f.intensity().mean();
        for model in [MixModel::Field, MixModel::Intensity] {
            let p = MixParams {
                coherent_fraction: 0.33,
                model,
            };
            let t = mix_coherent_background(&f, &p, 4).unwrap();
            assert!((t.mean() / base - 1.0).abs() < 0.02, "{model:?}");
            let g2 = t.g2_zero().unwrap();
            assert!((g2 - p.g2_zero()).abs() < 0.05, "{model:?}: {g2}");
        }
    }

    #[test]
    fn rejects_out_of_range_fraction() {
        let f = field();
        for eps in [-0.1, 1.1] {
            let p = MixParams {
                coherent_fraction: eps,
                model: MixModel::Field,
            };
            assert!(mix_coherent_background(&f, &p, 0).is_err());
        }
    }
}
