//! Simulation and analysis toolkit for narrowband photon pairs entangled in
//! polarization and frequency.
//!
//! The modules follow the signal chain: [`optics`] builds two-photon states
//! after the beam splitter, [`temporal`] turns them into correlation
//! functions, [`detection`] into coincidence histograms, and [`analysis`] /
//! [`tomography`] recover visibilities, phases, density matrices and CHSH
//! values from counts.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod detection;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod optics;
pub mod optimize;
pub mod plot;
pub mod qalgebra;
pub mod rng;
pub mod temporal;
pub mod tomography;

pub use error::{Error, Result};
