//! Numerical core for simulating a quantum particle in coupled waveguides and
//! computing its de Broglie-Bohm trajectories.
//!
//! The crate is organised around five building blocks:
//!
//! * [`grid`] / [`field`] / [`spectral`] / [`cf2d`]: uniform grids, complex
//!   scalar fields, FFT-based transforms and the `CF2D` dump format shared by
//!   every solver.
//! * [`potentials`]: the 2D coupled-waveguide potential (smoothed steps) and
//!   the sharp 1D double well.
//! * [`doublewell`]: the semi-analytic two-level model of the 1D double
//!   well: bound states, tunnel oscillations, barrier current and 1D Bohmian
//!   trajectories.
//! * [`tdse`]: split-operator spectral propagator for the 2D time-dependent
//!   Schrödinger equation.
//! * [`bohm`]: Bohmian velocity fields, trajectory integration and
//!   Born-rule (equivariance) diagnostics.
//!
//! Atomic units (ħ = m = 1) are the default throughout; see [`units`].
//!
//! Field storage is x-major: `values[(ix, iy)]` with `iy` varying fastest.
//! All file formats declare this layout in their header.

// Validation uses `!(v > 0.0)` so NaN is rejected along with the sign.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bohm;
pub mod cf2d;
pub mod doublewell;
pub mod error;
pub mod field;
pub mod grid;
pub mod potentials;
pub mod quad;
pub mod spectral;
pub mod tdse;
pub mod trajectory;
pub mod units;

pub use error::{Error, Result};
pub use field::{ComplexField1D, ComplexField2D};
pub use grid::{Grid1D, Grid2D, Rect};
pub use units::UnitsConfig;
