//! Monte Carlo simulation and photon statistics of pseudothermal and
//! superbunching pseudothermal light.
//!
//! The pipeline mirrors the optical setup: a Gaussian-noise-driven intensity
//! modulator multiplies the speckle produced by a rotating groundglass
//! ([`light`]); photons are drawn from the resulting intensity and passed
//! through a beam splitter and single-photon detectors ([`detection`]); the
//! [`stats`] module turns the time tags into photon-number distributions,
//! `g2(0)` estimates and coincidence histograms; [`experiment`] wires it all
//! together for reproducible runs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod error;
pub mod experiment;
pub mod light;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
