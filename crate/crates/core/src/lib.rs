//! Aharonov-Bohm caging in a rhombic lattice decorated with 2x2 unitary link
//! fields, encoded in the spin-phonon levels of a single trapped ion.
//!
//! The crate is organised bottom-up:
//!
//! - [`gauge`]: exact 2x2 link algebra (Wilson loops, interference matrix,
//!   caging order, Abelian classification).
//! - [`lattice`]: the spin-phonon Hamiltonian on the truncated
//!   `6(N+1)`-dimensional space.
//! - [`dynamics`]: unitary and Lindblad propagation, observables and the
//!   sequential-pulse Wilson loop measurement.
//! - [`tomography`]: blue-sideband flopping model, shot-noise synthesis and
//!   phonon-population fitting.
//! - [`experiments`]: scenario presets, sweeps, CSV/SVG output.
//!
//! Units throughout: hbar = 1, time in ms, angular frequencies in rad/ms.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod gauge;
pub mod lattice;
pub mod tomography;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
