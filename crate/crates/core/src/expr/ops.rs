use std::collections::{HashMap, HashSet};

use super::build::{add, mul, pow};
use super::node::{Expr, FnKind, Kind};
use super::number::Number;
use super::sign_f64;
use crate::epsilon::branchless_select;
use crate::error::Error;

impl Expr {
    /// Simultaneous substitution: replacements are not themselves rewritten.
    pub fn substitute(&self, bindings: &HashMap<Expr, Expr>) -> Expr {
        if bindings.is_empty() {
            return self.clone();
        }
        let mut memo = HashMap::new();
        subs_rec(self, bindings, &mut memo)
    }

    pub fn subs(&self, from: &Expr, to: &Expr) -> Expr {
        self.substitute(&HashMap::from([(from.clone(), to.clone())]))
    }

    /// Exact derivative with respect to a symbol.
    ///
    /// # Panics
    ///
    /// If an exponent depends on `wrt`; the function set has no logarithm.
    pub fn diff(&self, wrt: &Expr) -> Expr {
        let mut memo = HashMap::new();
        diff_rec(self, wrt, &mut memo)
    }

    /// Double-precision evaluation. Domain errors produce NaN or infinities
    /// rather than failing; only unbound symbols are errors.
    pub fn evaluate(&self, bindings: &HashMap<Expr, f64>) -> Result<f64, Error> {
        Evaluator::new(bindings).eval(self)
    }

    /// Symbols reachable from this expression, ordered by name.
    pub fn free_symbols(&self) -> Vec<Expr> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.clone()) {
                continue;
            }
            match e.kind() {
                Kind::Symbol(_) => out.push(e.clone()),
                Kind::Number(_) => {}
                _ => stack.extend(e.operands()),
            }
        }
        out.sort_by(Expr::canonical_cmp);
        out
    }

    pub fn contains(&self, sym: &Expr) -> bool {
        self.free_symbols().contains(sym)
    }
}

/// Differentiates a batch of expressions sharing one memo table.
pub fn diff_many(exprs: &[Expr], wrt: &Expr) -> Vec<Expr> {
    let mut memo = HashMap::new();
    exprs.iter().map(|e| diff_rec(e, wrt, &mut memo)).collect()
}

/// Substitutes into a batch of expressions sharing one memo table.
pub fn substitute_many(exprs: &[Expr], bindings: &HashMap<Expr, Expr>) -> Vec<Expr> {
    let mut memo = HashMap::new();
    exprs.iter().map(|e| subs_rec(e, bindings, &mut memo)).collect()
}

fn subs_rec(e: &Expr, bindings: &HashMap<Expr, Expr>, memo: &mut HashMap<Expr, Expr>) -> Expr {
    if let Some(r) = bindings.get(e) {
        return r.clone();
    }
    if let Some(r) = memo.get(e) {
        return r.clone();
    }
    let out = match e.kind() {
        Kind::Symbol(_) | Kind::Number(_) => e.clone(),
        kind => {
            let ops = e.operands();
            let new: Vec<Expr> = ops.iter().map(|c| subs_rec(c, bindings, memo)).collect();
            if new == ops {
                e.clone()
            } else {
                rebuild(kind, new)
            }
        }
    };
    memo.insert(e.clone(), out.clone());
    out
}

/// Reconstructs a node of the same variant from new operands.
pub(crate) fn rebuild(kind: &Kind, ops: Vec<Expr>) -> Expr {
    match kind {
        Kind::Add(_) => add(ops),
        Kind::Mul(_) => mul(ops),
        Kind::Pow(..) => {
            let mut it = ops.into_iter();
            pow(it.next().unwrap(), it.next().unwrap())
        }
        Kind::Call(f, _) => Expr::call(*f, ops).expect("arity preserved"),
        Kind::Symbol(_) | Kind::Number(_) => unreachable!("leaves have no operands"),
    }
}

fn diff_rec(e: &Expr, s: &Expr, memo: &mut HashMap<Expr, Expr>) -> Expr {
    if let Some(r) = memo.get(e) {
        return r.clone();
    }
    let out = match e.kind() {
        Kind::Symbol(_) => {
            if e == s {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Kind::Number(_) => Expr::zero(),
        Kind::Add(children) => add(children.iter().map(|c| diff_rec(c, s, memo))),
        Kind::Mul(children) => {
            let mut terms = Vec::new();
            for (i, c) in children.iter().enumerate() {
                let dc = diff_rec(c, s, memo);
                if dc.is_zero() {
                    continue;
                }
                let mut factors = Vec::with_capacity(children.len());
                factors.push(dc);
                factors.extend(children.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, f)| f.clone()));
                terms.push(mul(factors));
            }
            add(terms)
        }
        Kind::Pow(base, exp) => {
            let dexp = diff_rec(exp, s, memo);
            assert!(
                dexp.is_zero(),
                "derivative of a power whose exponent depends on {s} is not supported"
            );
            let dbase = diff_rec(base, s, memo);
            if dbase.is_zero() {
                Expr::zero()
            } else {
                mul([exp.clone(), pow(base.clone(), exp - 1.0), dbase])
            }
        }
        Kind::Call(f, args) => {
            let a = &args[0];
            let da = diff_rec(a, s, memo);
            match f {
                FnKind::Sin => mul([a.cos(), da]),
                FnKind::Cos => mul([Expr::int(-1), a.sin(), da]),
                FnKind::Tan => mul([1.0 + a.tan().powi(2), da]),
                FnKind::Sqrt => mul([Expr::rational(1, 2), da, a.sqrt().recip()]),
                FnKind::Abs => mul([a.sign(), da]),
                FnKind::Sign => Expr::zero(),
                FnKind::Min | FnKind::Max => {
                    let b = &args[1];
                    let db = diff_rec(b, s, memo);
                    if da == db {
                        da
                    } else if *f == FnKind::Min {
                        // a is active while a - b <= 0; ties pick the first argument
                        branchless_select(&(a - b), &da, &db)
                    } else {
                        branchless_select(&(b - a), &da, &db)
                    }
                }
                FnKind::Atan2 => {
                    let x = &args[1];
                    let dx = diff_rec(x, s, memo);
                    if da.is_zero() && dx.is_zero() {
                        Expr::zero()
                    } else {
                        (x * &da - a * &dx) / (x.powi(2) + a.powi(2))
                    }
                }
            }
        }
    };
    memo.insert(e.clone(), out.clone());
    out
}

/// Memoizing tree interpreter.
///
/// Sums subtract negative terms and products divide by factors with
/// negative exponents, like the lowered instruction stream. Compiled kernels
/// may reorder terms, so the two agree to rounding.
pub struct Evaluator<'a> {
    bindings: &'a HashMap<Expr, f64>,
    memo: HashMap<Expr, f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(bindings: &'a HashMap<Expr, f64>) -> Self {
        Evaluator {
            bindings,
            memo: HashMap::new(),
        }
    }

    pub fn eval(&mut self, e: &Expr) -> Result<f64, Error> {
        if let Some(v) = self.memo.get(e) {
            return Ok(*v);
        }
        let v = match e.kind() {
            Kind::Symbol(name) => *self
                .bindings
                .get(e)
                .ok_or_else(|| Error::MissingBinding(name.to_string()))?,
            Kind::Number(n) => n.to_f64(),
            Kind::Add(children) => {
                let mut acc = 0.0;
                for (i, c) in children.iter().enumerate() {
                    let (v, negated) = self.signed(c)?;
                    acc = match (i, negated) {
                        (0, false) => v,
                        (0, true) => -v,
                        (_, false) => acc + v,
                        (_, true) => acc - v,
                    };
                }
                acc
            }
            Kind::Mul(_) => {
                let (v, negative) = self.mul_magnitude(e)?;
                if negative {
                    -v
                } else {
                    v
                }
            }
            Kind::Pow(base, exp) => match exp.as_number() {
                Some(n) if n.is_negative() => 1.0 / self.positive_power(base, n.neg())?,
                Some(n) => self.positive_power(base, n)?,
                None => {
                    let b = self.eval(base)?;
                    b.powf(self.eval(exp)?)
                }
            },
            Kind::Call(f, args) => {
                let a = self.eval(&args[0])?;
                let b = match args.get(1) {
                    Some(x) => self.eval(x)?,
                    None => 0.0,
                };
                apply_fn(*f, a, b)
            }
        };
        self.memo.insert(e.clone(), v);
        Ok(v)
    }

    fn signed(&mut self, e: &Expr) -> Result<(f64, bool), Error> {
        match e.kind() {
            Kind::Number(n) if n.is_negative() => Ok((n.abs().to_f64(), true)),
            Kind::Mul(_) => self.mul_magnitude(e),
            _ => Ok((self.eval(e)?, false)),
        }
    }

    /// Value of `|c| * factors` for a product with coefficient `c`, plus the
    /// sign of `c`.
    fn mul_magnitude(&mut self, e: &Expr) -> Result<(f64, bool), Error> {
        let children = e.kind().args();
        let (coeff, factors) = match children[0].as_number() {
            Some(c) => (c, &children[1..]),
            None => (Number::ONE, children),
        };
        let mut num: Option<f64> = (!coeff.abs().is_one()).then(|| coeff.abs().to_f64());
        let mut den: Option<f64> = None;
        for f in factors {
            match f.kind() {
                Kind::Pow(base, exp) if exp.as_number().is_some_and(Number::is_negative) => {
                    let v = self.positive_power(base, exp.as_number().unwrap().neg())?;
                    den = Some(den.map_or(v, |d| d * v));
                }
                _ => {
                    let v = self.eval(f)?;
                    num = Some(num.map_or(v, |n| n * v));
                }
            }
        }
        let v = match (num, den) {
            (Some(n), Some(d)) => n / d,
            (Some(n), None) => n,
            (None, Some(d)) => 1.0 / d,
            (None, None) => 1.0,
        };
        Ok((v, coeff.is_negative()))
    }

    /// `base^exp` for a positive numeric exponent.
    fn positive_power(&mut self, base: &Expr, exp: Number) -> Result<f64, Error> {
        let b = self.eval(base)?;
        Ok(match exp.as_integer() {
            Some(1) => b,
            Some(k) => b.powi(k as i32),
            None => b.powf(exp.to_f64()),
        })
    }
}

/// Numeric semantics of each function kind; `b` is ignored for unary kinds.
pub fn apply_fn(f: FnKind, a: f64, b: f64) -> f64 {
    match f {
        FnKind::Sin => a.sin(),
        FnKind::Cos => a.cos(),
        FnKind::Tan => a.tan(),
        FnKind::Sqrt => a.sqrt(),
        FnKind::Abs => a.abs(),
        FnKind::Sign => sign_f64(a),
        FnKind::Min => a.min(b),
        FnKind::Max => a.max(b),
        FnKind::Atan2 => a.atan2(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(s: &str) -> Expr {
        Expr::symbol(s)
    }

    fn at(pairs: &[(&Expr, f64)]) -> HashMap<Expr, f64> {
        pairs.iter().map(|(e, v)| ((*e).clone(), *v)).collect()
    }

    #[test]
    fn substitute_examples() {
        let (x, y, eps) = (sym("x"), sym("y"), sym("eps"));
        assert_eq!((&x * &y).subs(&x, &Expr::int(2)), 2.0 * &y);

        let sinc = x.sin() / &x;
        let shifted = sinc.subs(&x, &(&x + &eps));
        assert_eq!(shifted, (&x + &eps).sin() / (&x + &eps));

        let swap = HashMap::from([(x.clone(), y.clone()), (y.clone(), x.clone())]);
        assert_eq!(x.substitute(&swap), y);
        assert_eq!((&x - &y).substitute(&swap), &y - &x);
    }

    #[test]
    fn substitute_with_empty_map_is_identity() {
        let x = sym("x");
        let e = x.sin() * x.cos() + 3.0;
        assert_eq!(e.substitute(&HashMap::new()), e);
    }

    #[test]
    fn derivative_examples() {
        let (x, y) = (sym("x"), sym("y"));
        assert_eq!(x.powi(2).diff(&x), 2.0 * &x);
        assert_eq!(y.diff(&x), Expr::zero());
        assert_eq!(x.abs().diff(&x), x.sign());
        assert_eq!(x.sign().diff(&x), Expr::zero());

        let d = (x.sin() / &x).diff(&x);
        let expected = x.cos() / &x - x.sin() / x.powi(2);
        assert_eq!(d, expected);
        for x0 in [0.5, 1.0, 2.0] {
            let h = 1e-6;
            let f = |v: f64| v.sin() / v;
            let fd = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
            let v = d.evaluate(&at(&[(&x, x0)])).unwrap();
            assert!((v - fd).abs() < 1e-8, "{v} vs {fd}");
        }
    }

    #[test]
    fn min_max_derivatives_pick_active_argument() {
        let (x, y) = (sym("x"), sym("y"));
        let dmin = x.powi(2).min(&y).diff(&x);
        assert_eq!(dmin.evaluate(&at(&[(&x, 1.0), (&y, 5.0)])).unwrap(), 2.0);
        assert_eq!(dmin.evaluate(&at(&[(&x, 3.0), (&y, 5.0)])).unwrap(), 0.0);
        // tie picks the first argument
        assert_eq!(x.min(&y).diff(&x).evaluate(&at(&[(&x, 2.0), (&y, 2.0)])).unwrap(), 1.0);
        let dmax = x.max(&y).diff(&x);
        assert_eq!(dmax.evaluate(&at(&[(&x, 3.0), (&y, 1.0)])).unwrap(), 1.0);
        assert_eq!(dmax.evaluate(&at(&[(&x, 0.0), (&y, 1.0)])).unwrap(), 0.0);
    }

    #[test]
    fn atan2_derivative() {
        let (x, y) = (sym("x"), sym("y"));
        let e = y.atan2(&x);
        let p = at(&[(&x, 0.7), (&y, -0.3)]);
        let r2 = 0.7f64.powi(2) + 0.3f64.powi(2);
        assert!((e.diff(&y).evaluate(&p).unwrap() - 0.7 / r2).abs() < 1e-14);
        assert!((e.diff(&x).evaluate(&p).unwrap() - 0.3 / r2).abs() < 1e-14);
    }

    #[test]
    fn evaluate_examples() {
        let (x, y) = (sym("x"), sym("y"));
        assert!((x.sin() / &x).evaluate(&at(&[(&x, 0.0)])).unwrap().is_nan());
        assert_eq!((&x + &y).evaluate(&at(&[(&x, 1.0), (&y, 2.0)])).unwrap(), 3.0);
        assert_eq!(Expr::int(-5).sign().evaluate(&HashMap::new()).unwrap(), -1.0);
        assert!(x.sign().evaluate(&at(&[(&x, 0.0)])).unwrap() == 0.0);
        assert!(x.sqrt().evaluate(&at(&[(&x, -1.0)])).unwrap().is_nan());
        assert!(matches!(
            (&x + &y).evaluate(&at(&[(&x, 1.0)])),
            Err(Error::MissingBinding(name)) if name == "y"
        ));
    }
}
