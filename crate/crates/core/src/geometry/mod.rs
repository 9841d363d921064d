//! Lie group types and small symbolic matrices.
//!
//! [`Rot3`] and [`Pose3`] are generic over [`Scalar`], so the same code
//! builds symbolic expressions (`S = Expr`) and evaluates numerically
//! (`S = f64`).

mod element;
mod matrix;
mod pose3;
mod rot3;
mod scalar;

pub use element::{Element, ElementType};
pub use matrix::SymMatrix;
pub use pose3::Pose3;
pub use rot3::Rot3;
pub use scalar::{Scalar, Vec3};
