//! Numerical laboratory for multi-soliton dynamics of the one-dimensional
//! semilinear wave equation in similarity variables.
//!
//! The crate is organized around a dependency-light numerical kernel
//! ([`numerics`]) and model layers on top of it:
//!
//! - [`centers`] — the finite-dimensional soliton-center ODE systems, their
//!   Lyapunov functionals, stability boxes, and convergence rates;
//! - [`spectral`] — the tridiagonal linearization matrix, its exact spectrum,
//!   and eigenbasis coordinates;
//! - [`profiles`] — solitons, generalized solitons, weighted Sobolev norms
//!   and the energy functional on a truncated hyperbolic grid;
//! - [`pde`] — IMEX time evolution of the self-similar wave equation;
//! - [`modulation`] — projections, the modulation solve, gap functionals and
//!   the shrinking-set norm;
//! - [`lorentz`] — boosts acting on profiles and center-of-mass prescription;
//! - [`shooting`] — initial data, exit-time runs, and the parameter search
//!   for trajectories that never leave the shrinking set;
//! - [`blowup_set`] — blow-up-set asymptotics near a characteristic point and
//!   multi-point configuration plans.

pub mod blowup_set;
pub mod centers;
pub mod error;
pub mod lorentz;
pub mod modulation;
pub mod numerics;
pub mod pde;
pub mod profiles;
pub mod shooting;
pub mod spectral;

pub use error::{LabError, Result};

/// Artifact version stamped into output files.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
