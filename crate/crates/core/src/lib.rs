//! Numerical laboratory for classical and quantum particles on a common
//! phase-space footing.
//!
//! The crate provides:
//!
//! * periodic phase-space grids with Fourier-dual frequency grids and the
//!   field containers that live on them ([`grid`], [`field`]),
//! * Wigner transforms between density matrices and phase-space
//!   quasi-densities ([`wigner`]),
//! * two rival evolution laws — Liouville transport and Moyal (quantum)
//!   evolution — plus position-space Schrödinger stepping, all as spectral
//!   split-step solvers ([`classical`], [`quantum`]),
//! * the observable hierarchy: pointwise classical expectations, statistical
//!   (roughness) observables, quantum operators on phase-space wave
//!   functions, and ordered correlators ([`observables`]),
//! * state admissibility diagnostics: purity, Heisenberg bound, positivity
//!   of the partial Fourier matrix ([`diagnostics`]),
//! * exact finite-dimensional (2^Q-state) realizations of location, motion
//!   and correlation operators ([`finite`]).
//!
//! All transforms run data-parallel over grid lines when the `parallel`
//! feature (default) is enabled; disabling it yields a fully sequential
//! build with identical results.

pub mod classical;
pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod field;
pub mod finite;
pub mod grid;
pub mod io;
pub mod observables;
pub mod potential;
pub mod quantum;
pub mod wigner;

pub use error::Error;
pub use field::{
    ClassicalWaveFunction, DensityMatrix, PhaseSpaceDensity, PositionWaveFunction, WignerFunction,
};
pub use grid::{PhaseSpaceGrid, SpatialGrid};
pub use potential::Potential;

/// Reduced Planck constant; the whole crate works in units with hbar = 1.
pub const HBAR: f64 = 1.0;

/// Complex double used throughout.
pub type C64 = num_complex::Complex<f64>;
