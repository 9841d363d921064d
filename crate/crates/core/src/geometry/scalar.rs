use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::epsilon::{epsilon_symbol, EpsilonPolicy};
use crate::expr::{sign_f64, Expr};

/// Number-like type that geometry code is generic over: `f64` for numeric
/// evaluation, [`Expr`] for symbolic construction.
pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    /// `sign(0) = 0`.
    fn sign(self) -> Self;
    fn min(self, other: Self) -> Self;
    fn max(self, other: Self) -> Self;
    fn atan2(self, x: Self) -> Self;
    /// Singularity-avoidance epsilon: a number, or the `epsilon` symbol.
    fn epsilon() -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn square(self) -> Self {
        self.clone() * self
    }

    /// `2 * min(0, sign(x)) + 1`: sign with `snz(0) = 1`.
    fn sign_no_zero(self) -> Self {
        Self::from_f64(2.0) * Self::zero().min(self.sign()) + Self::one()
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sign(self) -> Self {
        sign_f64(self)
    }
    fn min(self, other: Self) -> Self {
        f64::min(self, other)
    }
    fn max(self, other: Self) -> Self {
        f64::max(self, other)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    fn epsilon() -> Self {
        EpsilonPolicy::DOUBLE.value
    }
}

impl Scalar for Expr {
    fn from_f64(v: f64) -> Self {
        Expr::from_f64(v)
    }
    fn sin(self) -> Self {
        Expr::sin(&self)
    }
    fn cos(self) -> Self {
        Expr::cos(&self)
    }
    fn sqrt(self) -> Self {
        Expr::sqrt(&self)
    }
    fn abs(self) -> Self {
        Expr::abs(&self)
    }
    fn sign(self) -> Self {
        Expr::sign(&self)
    }
    fn min(self, other: Self) -> Self {
        Expr::min(&self, &other)
    }
    fn max(self, other: Self) -> Self {
        Expr::max(&self, &other)
    }
    fn atan2(self, x: Self) -> Self {
        Expr::atan2(&self, &x)
    }
    fn epsilon() -> Self {
        epsilon_symbol()
    }
    fn square(self) -> Self {
        self.powi(2)
    }
}

pub type Vec3<S> = [S; 3];

pub(crate) fn dot3<S: Scalar>(a: &Vec3<S>, b: &Vec3<S>) -> S {
    a[0].clone() * b[0].clone() + a[1].clone() * b[1].clone() + a[2].clone() * b[2].clone()
}

pub(crate) fn add3<S: Scalar>(a: &Vec3<S>, b: &Vec3<S>) -> Vec3<S> {
    [a[0].clone() + b[0].clone(), a[1].clone() + b[1].clone(), a[2].clone() + b[2].clone()]
}

pub(crate) fn sub3<S: Scalar>(a: &Vec3<S>, b: &Vec3<S>) -> Vec3<S> {
    [a[0].clone() - b[0].clone(), a[1].clone() - b[1].clone(), a[2].clone() - b[2].clone()]
}

pub(crate) fn neg3<S: Scalar>(a: &Vec3<S>) -> Vec3<S> {
    [-a[0].clone(), -a[1].clone(), -a[2].clone()]
}
