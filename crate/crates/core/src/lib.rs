//! Stochastic simulation of quantum measurement as spontaneous symmetry
//! breaking (SSB).
//!
//! A double-well order parameter ("the meter") is coupled to a spin density
//! matrix; noise triggers SSB and the meter reading realizes the measurement
//! outcome. The same machinery extends to two spatially separated EPR
//! detectors (Bell/CHSH statistics) and to the reheating-era generation of
//! cosmological density fluctuations.
//!
//! Module map:
//! - [`quantum`]: exact finite-dimensional spin algebra (states, observables,
//!   two-spin correlations).
//! - [`engine`]: seedable Gaussian noise, Euler–Maruyama integration, and the
//!   deterministic parallel ensemble runner.
//! - [`measurement`]: the single-apparatus measurement model and its
//!   closed-form estimates.
//! - [`fokker_planck`]: 1-D finite-difference solver used as an independent
//!   oracle for the readout statistics.
//! - [`epr`]: two-detector EPR trials, correlation estimates, the quadrature
//!   oracle and the CHSH statistic.
//! - [`cosmo`]: inflationary mode functions, conformal-time kernels, and the
//!   reheating power spectrum.
//! - [`astro`]: closed-form astrophysical scale estimates (sanity constants).

pub mod astro;
pub mod cosmo;
pub mod engine;
pub mod epr;
pub mod error;
pub mod fokker_planck;
pub mod measurement;
pub mod quantum;

pub use error::CoreError;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
