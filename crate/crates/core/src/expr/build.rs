//! Canonicalizing constructors.
//!
//! Local rewrites applied at construction: flattening of nested sums and
//! products, constant folding, like-term collection (`x + x -> 2*x`),
//! power collection (`x*x -> x^2`), numeric coefficients distributed over a
//! single sum (`-(a + b) -> -a - b`), and integer powers distributed over
//! products. Nothing deeper is attempted.

use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use super::node::{Expr, FnKind, Kind};
use super::number::Number;
use crate::error::Error;

impl Expr {
    pub fn symbol(name: &str) -> Expr {
        Expr::intern(Kind::Symbol(Arc::from(name)))
    }

    pub fn number(n: Number) -> Expr {
        Expr::intern(Kind::Number(n))
    }

    pub fn int(v: i64) -> Expr {
        Expr::number(Number::int(v))
    }

    pub fn rational(num: i64, den: i64) -> Expr {
        Expr::number(Number::ratio(num, den))
    }

    /// Float literal; integer and small dyadic values become exact rationals.
    pub fn from_f64(v: f64) -> Expr {
        Expr::number(Number::from_f64(v))
    }

    /// Float literal that is never converted to a rational.
    pub fn float(v: f64) -> Expr {
        Expr::number(Number::float(v))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn add_all<I: IntoIterator<Item = Expr>>(args: I) -> Expr {
        add(args)
    }

    pub fn mul_all<I: IntoIterator<Item = Expr>>(args: I) -> Expr {
        mul(args)
    }

    pub fn pow(&self, exp: &Expr) -> Expr {
        pow(self.clone(), exp.clone())
    }

    pub fn powi(&self, exp: i64) -> Expr {
        pow(self.clone(), Expr::int(exp))
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    pub fn sin(&self) -> Expr {
        call1(FnKind::Sin, self.clone())
    }

    pub fn cos(&self) -> Expr {
        call1(FnKind::Cos, self.clone())
    }

    pub fn tan(&self) -> Expr {
        call1(FnKind::Tan, self.clone())
    }

    pub fn sqrt(&self) -> Expr {
        call1(FnKind::Sqrt, self.clone())
    }

    pub fn abs(&self) -> Expr {
        call1(FnKind::Abs, self.clone())
    }

    pub fn sign(&self) -> Expr {
        call1(FnKind::Sign, self.clone())
    }

    pub fn min(&self, other: &Expr) -> Expr {
        call2(FnKind::Min, self.clone(), other.clone())
    }

    pub fn max(&self, other: &Expr) -> Expr {
        call2(FnKind::Max, self.clone(), other.clone())
    }

    /// `atan2(self, x)` with `self` as the y coordinate.
    pub fn atan2(&self, x: &Expr) -> Expr {
        call2(FnKind::Atan2, self.clone(), x.clone())
    }

    /// Generic call constructor; checks arity.
    pub fn call(f: FnKind, args: Vec<Expr>) -> Result<Expr, Error> {
        if args.len() != f.arity() {
            return Err(Error::Arity {
                function: f.name(),
                expected: f.arity(),
                found: args.len(),
            });
        }
        Ok(call_checked(f, args))
    }
}

/// Canonical sum.
pub fn add<I: IntoIterator<Item = Expr>>(args: I) -> Expr {
    let mut constant = Number::ZERO;
    let mut order: Vec<Expr> = Vec::new();
    let mut coeffs: HashMap<Expr, Number> = HashMap::new();

    let mut stack: Vec<Expr> = args.into_iter().collect();
    stack.reverse();
    while let Some(arg) = stack.pop() {
        match arg.kind() {
            Kind::Add(children) => stack.extend(children.iter().rev().cloned()),
            Kind::Number(n) => constant = constant.add(*n),
            _ => {
                let (c, term) = arg.split_coefficient();
                let term = term.expect("non-number term");
                match coeffs.get_mut(&term) {
                    Some(acc) => *acc = acc.add(c),
                    None => {
                        coeffs.insert(term.clone(), c);
                        order.push(term);
                    }
                }
            }
        }
    }

    let mut terms: Vec<Expr> = order
        .into_iter()
        .filter_map(|term| {
            let c = coeffs[&term];
            (!c.is_zero()).then(|| with_coefficient(c, &term))
        })
        .collect();
    terms.sort_by(Expr::canonical_cmp);

    if terms.is_empty() {
        return Expr::number(constant);
    }
    if constant.is_zero() && terms.len() == 1 {
        return terms.pop().unwrap();
    }
    let mut children = Vec::with_capacity(terms.len() + 1);
    if !constant.is_zero() {
        children.push(Expr::number(constant));
    }
    children.extend(terms);
    Expr::intern(Kind::Add(children.into()))
}

/// `c * term` for a term that carries no coefficient of its own.
fn with_coefficient(c: Number, term: &Expr) -> Expr {
    if c.is_one() {
        return term.clone();
    }
    let mut children = vec![Expr::number(c)];
    match term.kind() {
        Kind::Mul(factors) => children.extend(factors.iter().cloned()),
        _ => children.push(term.clone()),
    }
    Expr::intern(Kind::Mul(children.into()))
}

/// Canonical product.
pub fn mul<I: IntoIterator<Item = Expr>>(args: I) -> Expr {
    let mut coeff = Number::ONE;
    let mut order: Vec<Expr> = Vec::new();
    let mut exps: HashMap<Expr, Vec<Expr>> = HashMap::new();

    let mut stack: Vec<Expr> = args.into_iter().collect();
    stack.reverse();
    while let Some(arg) = stack.pop() {
        let (base, exp) = match arg.kind() {
            Kind::Mul(children) => {
                stack.extend(children.iter().rev().cloned());
                continue;
            }
            Kind::Number(n) => {
                coeff = coeff.mul(*n);
                continue;
            }
            Kind::Pow(b, e) => (b.clone(), e.clone()),
            _ => (arg.clone(), Expr::one()),
        };
        match exps.get_mut(&base) {
            Some(list) => list.push(exp),
            None => {
                exps.insert(base.clone(), vec![exp]);
                order.push(base);
            }
        }
    }

    if coeff.is_zero() {
        return Expr::number(coeff);
    }

    let mut factors: Vec<Expr> = Vec::with_capacity(order.len());
    for base in order {
        let list = exps.remove(&base).unwrap();
        let factor = if list.len() == 1 && list[0].is_one() {
            base
        } else {
            pow(base, add(list))
        };
        match factor.kind() {
            Kind::Number(n) => coeff = coeff.mul(*n),
            Kind::Mul(children) => {
                for c in children.iter() {
                    match c.as_number() {
                        Some(n) => coeff = coeff.mul(n),
                        None => factors.push(c.clone()),
                    }
                }
            }
            _ => factors.push(factor),
        }
    }
    if coeff.is_zero() {
        return Expr::number(coeff);
    }
    factors.sort_by(Expr::canonical_cmp);

    if factors.is_empty() {
        return Expr::number(coeff);
    }
    if factors.len() == 1 {
        if coeff.is_one() {
            return factors.pop().unwrap();
        }
        if let Kind::Add(terms) = factors[0].kind() {
            let c = Expr::number(coeff);
            return add(terms.iter().map(|t| mul([c.clone(), t.clone()])));
        }
    }
    let mut children = Vec::with_capacity(factors.len() + 1);
    if !coeff.is_one() {
        children.push(Expr::number(coeff));
    }
    children.extend(factors);
    Expr::intern(Kind::Mul(children.into()))
}

/// Canonical power.
pub fn pow(base: Expr, exp: Expr) -> Expr {
    if let Some(e) = exp.as_number() {
        if e.is_zero() {
            return Expr::one();
        }
        if e.is_one() {
            return base;
        }
    }
    if let Some(b) = base.as_number() {
        if b.is_one() {
            return Expr::one();
        }
        if let Some(e) = exp.as_number() {
            if let Some(k) = e.as_integer() {
                return Expr::number(b.powi(k));
            }
            if !b.is_rational() || !e.is_rational() {
                return Expr::number(Number::float(b.to_f64().powf(e.to_f64())));
            }
            if b.is_zero() && !e.is_negative() {
                return Expr::zero();
            }
        }
    }
    if let Some(k) = exp.as_number().and_then(Number::as_integer) {
        match base.kind() {
            Kind::Pow(inner, e1) => return pow(inner.clone(), mul([e1.clone(), exp.clone()])),
            Kind::Mul(factors) => {
                return mul(factors.iter().map(|f| pow(f.clone(), Expr::int(k))));
            }
            _ => {}
        }
    }
    Expr::intern(Kind::Pow(base, exp))
}

fn call1(f: FnKind, a: Expr) -> Expr {
    call_checked(f, vec![a])
}

fn call2(f: FnKind, a: Expr, b: Expr) -> Expr {
    call_checked(f, vec![a, b])
}

fn call_checked(f: FnKind, args: Vec<Expr>) -> Expr {
    if let Some(folded) = fold_call(f, &args) {
        return folded;
    }
    Expr::intern(Kind::Call(f, args.into()))
}

fn fold_call(f: FnKind, args: &[Expr]) -> Option<Expr> {
    let nums: Option<Vec<Number>> = args.iter().map(Expr::as_number).collect();
    if let Some(nums) = nums {
        return fold_numeric_call(f, &nums).map(Expr::number);
    }
    let a = &args[0];
    match f {
        FnKind::Abs => match a.kind() {
            Kind::Call(FnKind::Abs, _) => Some(a.clone()),
            Kind::Mul(_) => {
                let (c, rest) = a.split_coefficient();
                c.is_negative()
                    .then(|| call1(FnKind::Abs, mul([Expr::number(c.neg()), rest.unwrap()])))
            }
            _ => None,
        },
        FnKind::Sign => matches!(a.kind(), Kind::Call(FnKind::Sign, _)).then(|| a.clone()),
        FnKind::Min | FnKind::Max => (args[0] == args[1]).then(|| a.clone()),
        _ => None,
    }
}

fn fold_numeric_call(f: FnKind, nums: &[Number]) -> Option<Number> {
    let a = nums[0];
    let exact_zero = a.is_rational() && a.is_zero();
    let float = |v: f64| Some(Number::float(v));
    match f {
        FnKind::Abs => Some(a.abs()),
        FnKind::Sign => Some(a.sign()),
        FnKind::Min | FnKind::Max => {
            let b = nums[1];
            if a.is_rational() && b.is_rational() {
                let a_first = a.partial_cmp_value(b)?.is_le();
                Some(if a_first == (f == FnKind::Min) { a } else { b })
            } else if f == FnKind::Min {
                float(a.to_f64().min(b.to_f64()))
            } else {
                float(a.to_f64().max(b.to_f64()))
            }
        }
        FnKind::Sin | FnKind::Tan if exact_zero => Some(Number::ZERO),
        FnKind::Cos if exact_zero => Some(Number::ONE),
        FnKind::Sqrt => a.exact_sqrt().or_else(|| (!a.is_rational()).then(|| Number::float(a.to_f64().sqrt()))),
        FnKind::Atan2 => {
            let x = nums[1];
            if exact_zero && x.is_rational() && !x.is_negative() && !x.is_zero() {
                Some(Number::ZERO)
            } else if a.is_rational() && x.is_rational() {
                None
            } else {
                float(a.to_f64().atan2(x.to_f64()))
            }
        }
        _ if a.is_rational() => None,
        FnKind::Sin => float(a.to_f64().sin()),
        FnKind::Cos => float(a.to_f64().cos()),
        FnKind::Tan => float(a.to_f64().tan()),
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, |$a:ident, $b:ident| $body:expr) => {
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let ($a, $b) = (self, rhs);
                $body
            }
        }
        impl $trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let ($a, $b) = (self, rhs.clone());
                $body
            }
        }
        impl $trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let ($a, $b) = (self.clone(), rhs);
                $body
            }
        }
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let ($a, $b) = (self.clone(), rhs.clone());
                $body
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                let ($a, $b) = (self, Expr::from_f64(rhs));
                $body
            }
        }
        impl $trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                let ($a, $b) = (self.clone(), Expr::from_f64(rhs));
                $body
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let ($a, $b) = (Expr::from_f64(self), rhs);
                $body
            }
        }
        impl $trait<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let ($a, $b) = (Expr::from_f64(self), rhs.clone());
                $body
            }
        }
    };
}

binop!(Add, add, |a, b| add([a, b]));
binop!(Sub, sub, |a, b| add([a, mul([Expr::int(-1), b])]));
binop!(Mul, mul, |a, b| mul([a, b]));
binop!(Div, div, |a, b| mul([a, pow(b, Expr::int(-1))]));

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        mul([Expr::int(-1), self])
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        mul([Expr::int(-1), self.clone()])
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::from_f64(v)
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Expr {
        Expr::int(v)
    }
}
