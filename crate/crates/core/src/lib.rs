//! Solvers and verification tools for the singular, degenerate Dirichlet problem
//!
//! ```text
//! |u'|^alpha (F(D^2 u) + h u') + c |u|^alpha u + p u^-gamma = 0,   u = 0 on the boundary,
//! ```
//!
//! on intervals and radially symmetric balls.

pub mod barriers;
pub mod config;
pub mod eigen;
pub mod error;
pub mod expr;
pub mod grid_solver;
pub mod problem;
pub mod pucci;
pub mod ode;
pub mod oned;
pub mod quad;
pub mod radial;
pub mod residual;
pub mod scheme;
pub mod verify;

pub use error::{Error, Result};
pub use problem::{Coefficient, Geometry, GridFunction, Operator, ProblemSpec};
