//! Hash-consed symbolic expressions.

mod build;
mod display;
mod lower;
mod node;
mod number;
mod ops;

pub use build::{add, mul, pow};
pub use lower::{count_ops, count_ops_many, CountMode, NodeId, Op, OpGraph};
pub use node::{Expr, FnKind, Kind};
pub use number::Number;
pub use ops::{apply_fn, diff_many, substitute_many, Evaluator};


/// Sign with `sign(0) = 0`; NaN propagates.
pub fn sign_f64(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else if x == 0.0 {
        0.0
    } else {
        f64::NAN
    }
}
