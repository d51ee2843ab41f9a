//! Cavity-magnomechanical microwave squeezing.
//!
//! A three-mode system (microwave cavity, magnon Kittel mode, phonon) is
//! linearized around its driven steady state. The crate builds the drift
//! matrix in a real quadrature basis, checks stability, evaluates the
//! homodyne noise spectral density of the cavity output and searches
//! parameter space for squeezing.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! `f64` aliases below are what most callers want.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod optimize;
pub mod params;
pub mod scalar;
pub mod spectra;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type PhysicalParams = params::PhysicalParams<f64>;
pub type ModeParams = params::ModeParams<f64>;
pub type SteadyState = params::SteadyState<f64>;
pub type LinearizedModel = dynamics::LinearizedModel<f64>;
pub type StabilityReport = dynamics::StabilityReport<f64>;
pub type CovarianceMatrix = dynamics::CovarianceMatrix<f64>;
pub type SpectrumResult = spectra::SpectrumResult<f64>;
pub type SweepGrid = optimize::SweepGrid<f64>;
pub type ThresholdResult = optimize::ThresholdResult<f64>;
