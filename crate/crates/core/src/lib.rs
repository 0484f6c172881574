//! Signal and active-subspace detection under a union-of-subspaces model
//! in colored Gaussian noise.
//!
//! An observation either is pure noise or contains a signal lying in one of
//! `K0` known low-dimensional subspaces. The library provides:
//!
//! - [`geometry`] — subspace bases, projectors, principal angles, and
//!   SVD-based basis learning;
//! - [`noise`] — covariance handling, whitening, and noise sampling for
//!   three knowledge regimes (known statistics, unknown covariance, unknown
//!   statistics);
//! - [`detect`] — the GLRT decision rules for each regime plus a classical
//!   direct-sum baseline;
//! - [`bounds`] — chi-squared / Bessel special functions and the union,
//!   de Caen, Frechet, and Gaussian-tail probability bounds on detector
//!   performance;
//! - [`sim`] — a reproducible, parallel Monte-Carlo harness for threshold
//!   calibration, ROC sweeps, subspace-angle sweeps, noise-geometry and
//!   SNR-gap experiments;
//! - [`io`] — the shared CSV matrix format used by the CLI.

pub mod bounds;
pub mod detect;
pub mod error;
pub mod geometry;
pub mod io;
pub mod mc;
pub mod noise;
pub mod sim;

#[doc(hidden)]
pub mod testutil;

pub use error::{Error, Result};
pub use geometry::{PrincipalAngleSet, Subspace, UnionModel};
pub use noise::{NoiseModel, NoiseTruth, Regime, Whitener};
