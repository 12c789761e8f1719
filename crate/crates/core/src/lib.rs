//! Spectral laboratory for the compressible Navier-Stokes-Korteweg (NSK)
//! system on a periodic box.
//!
//! The crate provides, layer by layer:
//!
//! * [`model`] — physical parameters, pressure laws, admissibility checks,
//!   and the exponent bookkeeping for the time-weighted norm framework.
//! * [`grid`] — periodic lattice descriptors, wavenumber maps, dealiasing,
//!   and smooth low/high frequency splitting.
//! * [`fft`] — deterministic forward/inverse transforms over the lattice.
//! * [`symbol`] — per-mode eigenvalues, the exact linearized propagator
//!   matrix, exponential-integrator weight kernels, and the resolvent symbol.
//! * [`propagator`] — field-level application of the linear semigroup.
//! * [`nonlinear`] — pseudo-spectral evaluation of the NSK nonlinearities.
//! * [`norms`] — lattice Lebesgue/Sobolev/Besov norms, timelines, and the
//!   composite weighted functional used for small-data studies.
//! * [`integrator`] — exponential (Duhamel) time stepping and Picard mode.
//! * [`experiments`] — decay-rate, eigenvalue-asymptotics, and resolvent
//!   sweep campaigns.
//! * [`checkpoint`] — spectral state persistence.
//!
//! With the default `parallel` feature the mode/lattice loops run on rayon;
//! disabling it yields a sequential build with identical floating-point
//! results (all reductions are fixed-shape).

pub mod checkpoint;
pub mod experiments;
pub mod fft;
pub mod grid;
pub mod integrator;
pub mod model;
pub mod nonlinear;
pub mod norms;
pub mod propagator;
pub mod reduce;
pub mod symbol;

mod par;

/// Complex scalar used throughout the spectral layer.
pub type C64 = num_complex::Complex64;
