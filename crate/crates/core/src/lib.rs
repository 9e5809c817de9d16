//! Stochastic resonance in a Schmitt-trigger bistable element.
//!
//! The crate simulates a noisy inverting Schmitt trigger driven by weak
//! signals, measures its stochastic-resonance response, and implements two
//! detectors built on it: frequency recovery from the output spectrum and
//! amplitude/decay recovery from last-transition-time statistics.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amp_detect;
pub mod bank;
pub mod error;
pub mod experiments;
pub mod freq_detect;
pub mod noise;
pub mod signal;
pub mod spectral;
pub mod trigger;

pub use error::{Error, Result};
pub use noise::NoiseSpec;
pub use signal::{SignalSpec, Trace};
pub use spectral::Spectrum;
pub use trigger::{Level, TriggerConfig, TriggerState};
