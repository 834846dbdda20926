#![no_std]
#![warn(missing_docs)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Crossbar simulation and design-space exploration for ReRAM in-memory
//! computing arrays.
//!
//! The crate is split along the characterization pipeline:
//!
//! - [`device`]: the sinh cell I-V law, parameter fitting, and calibration of
//!   cell/wire parameters against measured cumulative conductance.
//! - [`circuit`]: the N×N crossbar with resistive wire segments as a
//!   nonlinear nodal system, a Newton DC solver, and Elmore-delay limits.
//! - [`testbench`]: one-hot triangle-wave characterization producing per-cell
//!   effective conductance and RMSE maps.
//! - [`surrogate`]: interpolated predictors built from a few characterized
//!   array sizes.
//! - [`dse`]: power/throughput/efficiency models and constrained grid search
//!   over array size, frequency and ADC resolution.
//!
//! Everything here is `no_std` + `alloc`; file formats, configuration and
//! parallel execution live in the companion `reram-dse` crate.

extern crate alloc;

pub mod circuit;
pub mod device;
pub mod dse;
mod error;
mod fingerprint;
mod grid;
pub mod surrogate;
pub mod testbench;

pub use crate::error::{Error, Result};
pub use crate::fingerprint::{Fingerprint, FingerprintBuilder};
pub use crate::grid::Grid;
