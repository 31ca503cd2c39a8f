//! Consumption and investment with labour income under a no-borrowing
//! constraint, in a market whose expected excess return follows a
//! mean-reverting (Kim–Omberg) factor.
//!
//! The problem is solved through its dual: the constrained problem becomes a
//! singular control problem for the dual state, which in turn is an optimal
//! stopping problem for `v(z, beta)`. This crate
//!
//! * solves the stopping variational inequality on a grid ([`vi`]),
//! * extracts the free boundary and the dual value ([`dual`]),
//! * maps wealth and the factor to optimal consumption and investment ([`policy`]),
//! * simulates the reflected optimal system ([`simulate`]), and
//! * cross-checks everything against closed forms and Monte Carlo ([`oracle`]).

pub mod config;
pub mod dual;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod parallel;
pub mod policy;
pub mod simulate;
pub mod stats;
pub mod vi;

pub use dual::{DualSurface, DualValue, FreeBoundary};
pub use error::{Error, Result};
pub use model::{ModelParams, ValidationMode};
pub use oracle::ConstBetaSolution;
pub use vi::{GridSpec, SolverOptions, ValueSurface};
