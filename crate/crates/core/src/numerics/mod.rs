//! Shared numerical kernel: grids, quadrature, banded solves, ODE
//! integration, Newton and bisection. No model semantics live here.
//!
//! Everything is pure and reentrant; values are immutable after construction.

pub mod banded;
pub mod bisect;
pub mod grid;
pub mod newton;
pub mod ode;
pub mod quadrature;

pub use banded::{solve_banded, Banded, BandedLu};
pub use bisect::{bisect_sign, Bracket};
pub use grid::HypGrid;
pub use newton::{newton, Jacobian, NewtonSolution};
pub use ode::{integrate_rk, SolverMeta, Trajectory};
pub use quadrature::{gauss_weights, integrate};

/// Default adaptive ODE tolerance.
pub const DEFAULT_ODE_TOL: f64 = 1e-10;
/// Default Newton residual tolerance.
pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;
/// Default Newton iteration cap.
pub const DEFAULT_NEWTON_MAX_ITER: usize = 50;
