//! Simulation and analysis toolkit for Λ-type atomic-ensemble quantum
//! memories.
//!
//! The [`solver`] integrates the Maxwell-Bloch equations for the signal
//! field A, atomic polarization P and spin wave B in normalized units;
//! [`protocols`] and [`norm`] build pulse-area and detuning sweeps on top of
//! it. [`interferometry`] and [`characterization`] hold the analysis side:
//! spectral-interference phase reconstruction, visibility modelling and the
//! fits used to characterize a memory experimentally.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characterization;
pub mod error;
pub mod field;
pub mod fit;
pub mod interferometry;
pub mod norm;
pub mod protocols;
pub mod solver;
pub mod spectrum;

pub use error::{Error, Result};
pub use field::{
    control_envelope, gaussian_signal, gaussian_signal_at, ControlPulse, MemoryParams, TemporalField, TimeGrid,
};
pub use fit::FitResult;
pub use solver::{solve, GridConfig, SolveResult};
pub use spectrum::{signal_from_spectrum, to_spectrum, to_time, SpectralField};
