//! Banks of forced Hopf-bifurcation resonators ("detectors").
//!
//! Each detector integrates
//!
//! ```text
//! dz/dt = (mu + j*omega0) z + b |z|^2 z + F(t)
//! ```
//!
//! at the bifurcation point (`mu = 0`) with a real forcing signal, and the
//! envelope `|z|` indicates when the detector's characteristic frequency is
//! present in the input. The crate provides the single-resonator steppers
//! ([`resonator`]), bank construction and streaming ([`bank`]),
//! single-sideband frequency shifting for high detectors ([`shift`]), signal
//! synthesis and file I/O ([`signal`]), and the measurement routines used by
//! the `hopfbank` CLI ([`characterize`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bank;
pub mod characterize;
mod error;
pub mod resonator;
pub mod shift;
pub mod signal;
pub mod tables;

pub use bank::{
    AmpScaleTable, BandwidthRequest, BankConfig, DetectorBank, DetectorRuntime, ResponseMatrix,
};
pub use error::{Error, Result};
pub use resonator::{ComplexState, DetectorSpec, DetectorState, Features, SolverMethod};
pub use shift::ShiftPlan;
pub use signal::AudioBuffer;
