//! Numeric literals stored in expression nodes.
//!
//! Exact rationals are folded exactly. Floats fold with floats; when a float
//! meets a rational the rational is promoted, so every `Add`/`Mul` carries at
//! most one leading constant.

use std::cmp::Ordering;
use std::fmt;

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedMul, One, Signed, ToPrimitive, Zero};

#[derive(Clone, Copy, Debug)]
pub enum Number {
    Rational(Rational64),
    Float(f64),
}

impl Number {
    pub const ZERO: Number = Number::Rational(Rational64::new_raw(0, 1));
    pub const ONE: Number = Number::Rational(Rational64::new_raw(1, 1));
    pub const NEG_ONE: Number = Number::Rational(Rational64::new_raw(-1, 1));

    pub fn int(v: i64) -> Number {
        Number::Rational(Rational64::from_integer(v))
    }

    pub fn ratio(num: i64, den: i64) -> Number {
        assert!(den != 0, "zero denominator in rational literal");
        Number::Rational(Rational64::new(num, den))
    }

    /// Float literal, normalizing `-0.0` to `0.0` and NaN to one bit pattern
    /// so hash-consing sees a single representation.
    pub fn float(v: f64) -> Number {
        if v == 0.0 {
            Number::Float(0.0)
        } else if v.is_nan() {
            Number::Float(f64::NAN)
        } else {
            Number::Float(v)
        }
    }

    /// Converts an `f64` into the most exact literal: integers and dyadic
    /// fractions with small denominators become rationals.
    pub fn from_f64(v: f64) -> Number {
        if v.is_finite() {
            for shift in 0..=16 {
                let scaled = v * f64::from(1u32 << shift);
                if scaled.fract() == 0.0 && scaled.abs() < 9.0e15 {
                    return Number::ratio(scaled as i64, 1i64 << shift);
                }
            }
        }
        Number::float(v)
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Number::Rational(r) => r.to_f64().unwrap_or(f64::NAN),
            Number::Float(f) => f,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            Number::Rational(r) => r.is_zero(),
            Number::Float(f) => f == 0.0,
        }
    }

    pub fn is_one(self) -> bool {
        match self {
            Number::Rational(r) => r.is_one(),
            Number::Float(f) => f == 1.0,
        }
    }

    pub fn is_negative(self) -> bool {
        match self {
            Number::Rational(r) => r.is_negative(),
            Number::Float(f) => f < 0.0,
        }
    }

    pub fn is_rational(self) -> bool {
        matches!(self, Number::Rational(_))
    }

    /// The integer value, for exact rational integers only.
    pub fn as_integer(self) -> Option<i64> {
        match self {
            Number::Rational(r) if r.is_integer() => Some(*r.numer()),
            _ => None,
        }
    }

    pub fn abs(self) -> Number {
        match self {
            Number::Rational(r) => Number::Rational(r.abs()),
            Number::Float(f) => Number::float(f.abs()),
        }
    }

    pub fn neg(self) -> Number {
        match self {
            Number::Rational(r) => Number::Rational(-r),
            Number::Float(f) => Number::float(-f),
        }
    }

    pub fn add(self, other: Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => match a.checked_add(&b) {
                Some(r) => Number::Rational(r),
                None => Number::float(self.to_f64() + other.to_f64()),
            },
            _ => Number::float(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul(self, other: Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => match a.checked_mul(&b) {
                Some(r) => Number::Rational(r),
                None => Number::float(self.to_f64() * other.to_f64()),
            },
            _ => Number::float(self.to_f64() * other.to_f64()),
        }
    }

    /// Integer power. `0^-n` yields a float infinity.
    pub fn powi(self, exp: i64) -> Number {
        match self {
            Number::Rational(r) => {
                if r.is_zero() && exp < 0 {
                    return Number::Float(f64::INFINITY);
                }
                let base = if exp < 0 { r.recip() } else { r };
                let mut acc = Rational64::one();
                for _ in 0..exp.unsigned_abs() {
                    match acc.checked_mul(&base) {
                        Some(next) => acc = next,
                        None => return Number::float(self.to_f64().powf(exp as f64)),
                    }
                }
                Number::Rational(acc)
            }
            Number::Float(f) => Number::float(f.powi(exp as i32)),
        }
    }

    pub fn sign(self) -> Number {
        match self {
            Number::Rational(r) => Number::int(if r.is_zero() {
                0
            } else if r.is_negative() {
                -1
            } else {
                1
            }),
            Number::Float(f) => Number::float(crate::expr::sign_f64(f)),
        }
    }

    /// Exact comparison for rationals, IEEE comparison otherwise.
    pub fn partial_cmp_value(self, other: Number) -> Option<Ordering> {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => Some(a.cmp(&b)),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }

    /// Exact square root of a rational perfect square.
    pub fn exact_sqrt(self) -> Option<Number> {
        let Number::Rational(r) = self else {
            return None;
        };
        if r.is_negative() {
            return None;
        }
        let root = |v: i64| {
            let s = (v as f64).sqrt().round() as i64;
            (s * s == v).then_some(s)
        };
        Some(Number::ratio(root(*r.numer())?, root(*r.denom())?))
    }

    /// Bit-level identity used by the interner.
    pub(crate) fn key(self) -> (u8, i64, i64) {
        match self {
            Number::Rational(r) => (0, *r.numer(), *r.denom()),
            Number::Float(f) => (1, f.to_bits() as i64, 0),
        }
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Number {}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Rational(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Number::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Number::Float(v) => write!(f, "{v:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_f64_prefers_exact_rationals() {
        assert_eq!(Number::from_f64(2.0), Number::int(2));
        assert_eq!(Number::from_f64(0.5), Number::ratio(1, 2));
        assert!(matches!(Number::from_f64(0.1), Number::Float(_)));
    }

    #[test]
    fn mixed_arithmetic_promotes_to_float() {
        let r = Number::ratio(1, 2).add(Number::float(0.25));
        assert_eq!(r, Number::float(0.75));
    }

    #[test]
    fn powi_is_exact_and_handles_zero() {
        assert_eq!(Number::ratio(2, 3).powi(-2), Number::ratio(9, 4));
        assert_eq!(Number::ZERO.powi(-1), Number::Float(f64::INFINITY));
    }

    #[test]
    fn signed_zero_is_normalized() {
        assert_eq!(Number::float(-0.0), Number::float(0.0));
    }
}
