//! Simulation and analysis toolkit for itinerant microwave photons measured
//! through a linear amplification chain.
//!
//! * [`fock`]: diagonal photon-number states, quadrature marginals, channels
//!   and figures of merit.
//! * [`temporal_mode`]: mode functions and quadrature extraction from traces.
//! * [`simulator`]: Monte-Carlo generation of traces and calibration tables.
//! * [`tomography`]: calibration and density-matrix reconstruction.
//! * [`characterization`]: backaction, added-noise and efficiency fits.
//! * [`io`]: trace and table file formats.
//! * [`pipeline`]: simulate-extract-reconstruct runs.

pub mod characterization;
pub mod error;
pub mod fock;
pub mod io;
pub mod nelder_mead;
pub mod pipeline;
pub mod rng;
pub mod simulator;
pub mod temporal_mode;
pub mod tomography;

pub use error::{Error, Result};
