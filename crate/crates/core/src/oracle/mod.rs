//! Independent ground truth for the closed forms.
//!
//! [`covariance_spectrum`] keeps the full cavity dynamics and the unsymmetrized input
//! correlators, so it is the reference for sideband asymmetry. [`timedomain_simulate`]
//! integrates the classical-equivalent Langevin equation with a realizable feedback
//! loop; its records feed [`periodogram`].

mod check;
mod covariance;
mod dump;
mod periodogram;
mod timedomain;

pub use check::*;
pub use covariance::*;
pub use dump::*;
pub use periodogram::*;
pub use timedomain::*;
