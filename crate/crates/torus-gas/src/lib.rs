//! Gibbs measures of pairwise-interacting particle gases on the torus.
//!
//! The library is organized bottom-up: `grid` holds periodic fields and their
//! spectra, `kernel` the interaction multipliers g^(m), `equilibrium` the
//! mean-field minimizers, `particles` finite-N configurations and energies,
//! `regularize` the spectral smoothing of empirical measures, `construct`
//! deterministic low-energy configurations, `sampler` the Metropolis chain and
//! the tail/transform estimators built on it. `acceptance` bundles the
//! end-to-end checks run by the test suite and the CLI.

pub mod acceptance;
pub mod config;
pub mod construct;
pub mod equilibrium;
pub mod error;
pub mod fftn;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod particles;
pub mod partition;
pub mod potential;
pub mod regularize;
pub mod runner;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
