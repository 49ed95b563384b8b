//! Radar-aided proactive blockage prediction for mmWave links.
//!
//! The crate covers the whole classical processing chain:
//!
//! * [`sim`]: street scenes with moving objects, FMCW IF frame synthesis and
//!   ground-truth LOS blockage labels.
//! * [`dsp`]: range/Doppler/angle FFTs producing the radar cube and the
//!   range-velocity and range-angle maps.
//! * [`detect`]: 2D cell-averaging CFAR, DBSCAN clustering and per-object
//!   range/velocity/angle measurement extraction.
//! * [`tracking`]: constant-velocity unscented Kalman filter tracks with greedy
//!   gated association.
//! * [`predict`]: future-blockage labels, stacked track features, k-NN
//!   classification and sequence-level dataset splitting.
//! * [`metrics`] and [`experiment`]: confusion-matrix metrics and prediction
//!   horizon sweeps.
//!
//! File formats used by the `radblock` CLI live in [`io`].

// `!(x > 0.0)` style checks are kept so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detect;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod predict;
pub mod sim;
pub mod tracking;

pub use error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
