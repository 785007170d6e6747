//! Simulation of pulse-driven two-level emitters with a drifting transition
//! frequency: single-emitter emission spectra, Hong-Ou-Mandel cross
//! correlations of two emitters, and ensemble spectra.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bloch;
pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod noise;
pub mod regression;
pub mod spectrum;
pub mod tpi;

pub use error::{Error, Result};
