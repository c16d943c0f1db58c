//! Continuous linear position measurement of a feedback-cooled optomechanical oscillator.
//!
//! * [`model`]: plant parameters, susceptibilities, output coefficients.
//! * [`spectra`]: closed-form heterodyne, homodyne, cold-damping and in-loop spectra.
//! * [`noisebudget`]: classical laser noise inference and bounds.
//! * [`oracle`]: exact covariance-propagation spectra and a stochastic time-domain simulator.
//! * [`estimate`]: synthetic acquisitions, Lorentzian sideband fits, cooling curves.
//! * [`config`] and [`cli`]: file-driven runs behind the `omk` binary.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimate;
pub mod model;
pub mod noisebudget;
pub mod oracle;
pub mod presets;
pub mod spectra;

pub use error::{Error, Result};
