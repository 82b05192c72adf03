//! Pseudospectral laboratory for the derivative nonlinear Schrödinger equation
//!
//! ```text
//! i u_t + u_xx = -i (|u|^2 u)_x
//! ```
//!
//! on a large periodic box standing in for the real line. The crate covers:
//!
//! - [`grid`]: uniform periodic grids, unitary Fourier transforms, spectral
//!   derivatives, norms, and the binary snapshot format.
//! - [`solver`]: the exact linear propagator, integrating-factor RK4 and
//!   ETDRK4 time stepping, conserved quantities, and the observer-driven run
//!   loop.
//! - [`vector_field`]: the operator `L = x + 2it∂ₓ`, the co-evolved
//!   linearized equation for `Lu`, and Klainerman–Sobolev ratios.
//! - [`wave_packets`]: wave packets along rays `x = vt`, the asymptotic
//!   profile `γ(t, v)` (physical and Fourier routes), and the approximation
//!   ratios between `u` and `γ`.
//! - [`asymptotic`]: the asymptotic ODE for `γ`, its exact solution, and the
//!   remainder measured from simulations.
//! - [`solitons`]: the Kaup–Newell soliton family and its localization
//!   obstruction.
//! - [`harness`]: configuration, experiment pipelines, power-law fits and
//!   manifests. The `dnls-lab` binary is a thin front end over it.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod error;
pub mod grid;
pub mod harness;
pub mod solitons;
pub mod solver;
pub mod vector_field;
pub mod wave_packets;

pub use error::{DnlsError, Result};
pub use grid::{ComplexField, GridSpec, Norms, Spectrum};
pub use solver::{ConservedTriple, DiagnosticsRecord, Integrator, SolverConfig};

/// Japanese bracket `⟨t⟩ = (1 + t²)^{1/2}`.
#[inline]
pub fn japanese_bracket(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}
