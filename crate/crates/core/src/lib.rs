//! Semi-implicit Euler solver for the two-dimensional Keller–Segel system
//!
//! ```text
//!   d(rho)/dt   = Lap(rho) - chi * div(rho grad c)
//!   tau dc/dt   = Lap(c) - alpha c + gamma rho
//! ```
//!
//! on periodic or Neumann rectangles, together with diagnostics for the
//! structure the scheme is known to preserve (mass, positivity, free-energy
//! dissipation) and harnesses for temporal convergence and blow-up probes.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod linsolve;
pub mod scheme;

pub use error::{BlowupCause, Error, Result};
pub use grid::{make_grid, Backend, BcKind, Field, Grid, VectorField};
