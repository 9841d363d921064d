//! Symbolic expressions, Lie group geometry, tangent-space Jacobians and
//! common-subexpression-eliminated kernels, with a small Levenberg-Marquardt
//! optimizer on top.

pub mod bench;
pub mod cse;
pub mod epsilon;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod optimizer;
pub mod tangent_diff;

pub use error::{Error, Result};
pub use expr::{CountMode, Expr, FnKind};
