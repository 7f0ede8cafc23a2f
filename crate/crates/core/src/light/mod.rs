//! Stochastic intensity traces of pseudothermal and superbunching
//! pseudothermal light.

pub mod gaussian_process;
pub mod mix;
pub mod modulation;
pub mod speckle;
pub mod trace;

pub use gaussian_process::CorrelationShape;
pub use mix::{mix_coherent_background, MixModel, MixParams};
pub use modulation::{gen_modulation_intensity, ModulationParams};
pub use speckle::{gen_speckle_field, gen_speckle_intensity, SpeckleField, SpeckleParams};
pub use trace::{multiply_traces, IntensityTrace};
