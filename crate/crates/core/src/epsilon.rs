//! Branchless singularity handling.
//!
//! A removable singularity at `x0` is avoided by shifting the input a tiny
//! amount away from it, in the direction of its sign:
//! `f_safe(x) = f(x + snz(x) * epsilon)`. Everything is expressed with
//! `sign`/`min`/`max`, so compiled kernels stay free of branches.

use std::collections::HashMap;
use std::fmt;

use crate::expr::Expr;

/// Name of the symbol that stands for epsilon in generated expressions.
pub const EPSILON_SYMBOL: &str = "epsilon";

/// Ten times the machine epsilon of the target precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonPolicy {
    pub value: f64,
}

impl EpsilonPolicy {
    pub const DOUBLE: EpsilonPolicy = EpsilonPolicy { value: 2.2e-15 };
    pub const SINGLE: EpsilonPolicy = EpsilonPolicy { value: 1.2e-6 };

    /// # Panics
    ///
    /// If `value` is not strictly positive.
    pub fn new(value: f64) -> Self {
        assert!(value > 0.0, "epsilon must be positive, got {value}");
        EpsilonPolicy { value }
    }
}

impl Default for EpsilonPolicy {
    fn default() -> Self {
        EpsilonPolicy::DOUBLE
    }
}

pub fn epsilon_symbol() -> Expr {
    Expr::symbol(EPSILON_SYMBOL)
}

/// `snz(x) = 2 * min(0, sign(x)) + 1`: the sign of `x`, with `snz(0) = 1`.
pub fn sign_no_zero(x: &Expr) -> Expr {
    2.0 * Expr::zero().min(&x.sign()) + 1.0
}

/// Shifts `x` away from `x0` by `eps` inside `f`:
/// `x <- (x - x0) + snz(x - x0) * eps + x0`.
pub fn epsilonize(f: &Expr, x: &Expr, eps: &Expr, x0: f64) -> Expr {
    let offset = x - x0;
    let shifted = &offset + sign_no_zero(&offset) * eps + x0;
    f.subs(x, &shifted)
}

/// `cond <= 0 ? a : b` as `a + max(sign(cond), 0) * (b - a)`.
pub fn branchless_select(cond: &Expr, a: &Expr, b: &Expr) -> Expr {
    a + cond.sign().max(&Expr::zero()) * (b - a)
}

/// Classification of a raw function value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RawValue {
    NaN,
    PosInf,
    NegInf,
    Finite(f64),
}

impl RawValue {
    pub fn classify(v: f64) -> Self {
        if v.is_nan() {
            RawValue::NaN
        } else if v == f64::INFINITY {
            RawValue::PosInf
        } else if v == f64::NEG_INFINITY {
            RawValue::NegInf
        } else {
            RawValue::Finite(v)
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, RawValue::PosInf | RawValue::NegInf)
    }
}

impl fmt::Display for RawValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawValue::NaN => f.write_str("NaN"),
            RawValue::PosInf => f.write_str("+Inf"),
            RawValue::NegInf => f.write_str("-Inf"),
            RawValue::Finite(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    RemovableAndHandled,
    NonRemovable,
    Mismatch,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::RemovableAndHandled => "removable-and-handled",
            Verdict::NonRemovable => "non-removable",
            Verdict::Mismatch => "mismatch",
        })
    }
}

/// Which check decided a failing verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Value,
    Derivative,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Value => "value",
            Stage::Derivative => "derivative",
        })
    }
}

/// Limits of one function near the singular point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageReport {
    /// `f(x0)` with epsilon set to zero.
    pub raw: RawValue,
    /// `lim x->x0 f(x)` with epsilon set to zero; NaN if it does not exist.
    pub true_limit: f64,
    /// `lim eps->0+ f(x0)`; NaN if it does not exist.
    pub eps_limit: f64,
}

impl StageReport {
    fn verdict(&self, tol: f64) -> Verdict {
        if self.raw.is_infinite() || !self.true_limit.is_finite() {
            Verdict::NonRemovable
        } else if self.eps_limit.is_finite() && agree(self.true_limit, self.eps_limit, tol) {
            Verdict::RemovableAndHandled
        } else {
            Verdict::Mismatch
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularityReport {
    pub x0: f64,
    pub value: StageReport,
    pub derivative: StageReport,
    pub verdict: Verdict,
    /// The first failing stage, `None` when handled.
    pub failed_stage: Option<Stage>,
}

impl SingularityReport {
    pub fn raw_value_at_x0(&self) -> RawValue {
        self.value.raw
    }

    pub fn true_limit(&self) -> f64 {
        self.value.true_limit
    }

    pub fn eps_limit(&self) -> f64 {
        self.value.eps_limit
    }

    pub fn derivative_true_limit(&self) -> f64 {
        self.derivative.true_limit
    }

    pub fn derivative_eps_limit(&self) -> f64 {
        self.derivative.eps_limit
    }
}

impl fmt::Display for SingularityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "singularity check at x0 = {}", self.x0)?;
        writeln!(f, "{:<12} {:>12} {:>24} {:>24}", "stage", "raw", "true limit", "epsilon limit")?;
        for (name, s) in [("value", &self.value), ("derivative", &self.derivative)] {
            writeln!(
                f,
                "{:<12} {:>12} {:>24} {:>24}",
                name,
                s.raw.to_string(),
                format!("{:.12e}", s.true_limit),
                format!("{:.12e}", s.eps_limit)
            )?;
        }
        match self.failed_stage {
            Some(stage) => write!(f, "verdict: {} ({stage})", self.verdict),
            None => write!(f, "verdict: {}", self.verdict),
        }
    }
}

/// Agreement tolerance between limits, relative to `max(1, |a|, |b|)`.
pub const LIMIT_TOLERANCE: f64 = 1e-6;

const STEP_EXPONENTS: std::ops::RangeInclusive<i32> = 10..=40;
const RICHARDSON_COLUMNS: usize = 8;

fn agree(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Estimate of `lim h->0+ g(h)` from samples at `h = 2^-k`.
#[derive(Clone, Copy, Debug)]
struct Limit {
    value: f64,
    error: f64,
}

/// Richardson extrapolation assuming a power series in `h`. Returns the
/// tableau entry with the smallest error estimate, so the round-off that
/// dominates at tiny steps is never preferred over a clean coarse estimate.
fn richardson<G: FnMut(f64) -> f64>(mut g: G) -> Limit {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut best = Limit {
        value: f64::NAN,
        error: f64::INFINITY,
    };
    for k in STEP_EXPONENTS {
        let h = 2f64.powi(-k);
        let mut row = vec![g(h)];
        if let Some(prev) = rows.last() {
            for j in 1..RICHARDSON_COLUMNS.min(prev.len() + 1) {
                let factor = 2f64.powi(j as i32) - 1.0;
                row.push(row[j - 1] + (row[j - 1] - prev[j - 1]) / factor);
            }
            for (j, &v) in row.iter().enumerate() {
                let mut err = if j < prev.len() { (v - prev[j]).abs() } else { 0.0 };
                if j > 0 {
                    err = err.max((v - row[j - 1]).abs());
                }
                if v.is_finite() && err < best.error {
                    best = Limit { value: v, error: err };
                }
            }
        }
        rows.push(row);
    }
    best
}

fn converged(l: Limit, tol: f64) -> Option<f64> {
    (l.value.is_finite() && l.error <= tol * 1f64.max(l.value.abs())).then_some(l.value)
}

fn stage_report(f: &Expr, x: &Expr, eps: &Expr, x0: f64, tol: f64) -> StageReport {
    let mut bindings = HashMap::from([(x.clone(), x0), (eps.clone(), 0.0)]);
    let mut eval = |xv: f64, ev: f64| {
        bindings.insert(x.clone(), xv);
        bindings.insert(eps.clone(), ev);
        f.evaluate(&bindings).unwrap_or(f64::NAN)
    };
    let raw = RawValue::classify(eval(x0, 0.0));
    let right = converged(richardson(|h| eval(x0 + h, 0.0)), tol);
    let left = converged(richardson(|h| eval(x0 - h, 0.0)), tol);
    let true_limit = match (left, right) {
        (Some(l), Some(r)) if agree(l, r, tol) => 0.5 * (l + r),
        _ => f64::NAN,
    };
    let eps_limit = converged(richardson(|h| eval(x0, h)), tol).unwrap_or(f64::NAN);
    StageReport {
        raw,
        true_limit,
        eps_limit,
    }
}

/// Checks that an epsilon-guarded function `f_safe(x, eps)` takes the right
/// value, and has the right first derivative, at the singular point `x0`.
///
/// Limits are estimated numerically: the true limit as `x -> x0` with
/// `eps = 0` (from both sides), and the one-sided limit as `eps -> 0+` at
/// `x = x0`. Symbols other than `x` and `eps` must not appear.
pub fn verify_singularity_handling(f_safe: &Expr, x: &Expr, eps: &Expr, x0: f64) -> SingularityReport {
    let tol = LIMIT_TOLERANCE;
    let value = stage_report(f_safe, x, eps, x0, tol);
    let derivative = stage_report(&f_safe.diff(x), x, eps, x0, tol);
    let (verdict, failed_stage) = match value.verdict(tol) {
        Verdict::RemovableAndHandled => match derivative.verdict(tol) {
            Verdict::RemovableAndHandled => (Verdict::RemovableAndHandled, None),
            v => (v, Some(Stage::Derivative)),
        },
        v => (v, Some(Stage::Value)),
    };
    SingularityReport {
        x0,
        value,
        derivative,
        verdict,
        failed_stage,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval1(e: &Expr, pairs: &[(&Expr, f64)]) -> f64 {
        let b: HashMap<Expr, f64> = pairs.iter().map(|(k, v)| ((*k).clone(), *v)).collect();
        e.evaluate(&b).unwrap()
    }

    #[test]
    fn sign_no_zero_values() {
        let x = Expr::symbol("x");
        let snz = sign_no_zero(&x);
        assert_eq!(eval1(&snz, &[(&x, 0.0)]), 1.0);
        assert_eq!(eval1(&snz, &[(&x, -0.0)]), 1.0);
        assert_eq!(eval1(&snz, &[(&x, -3.0)]), -1.0);
        assert_eq!(eval1(&snz, &[(&x, 2.5)]), 1.0);
    }

    #[test]
    fn select_examples() {
        let (z, a, b) = (Expr::symbol("z"), Expr::symbol("a"), Expr::symbol("b"));
        let s = branchless_select(&(&z - 3.0), &a, &b);
        for (zv, expected) in [(2.0, 10.0), (3.0, 10.0), (5.0, 20.0)] {
            assert_eq!(eval1(&s, &[(&z, zv), (&a, 10.0), (&b, 20.0)]), expected);
        }
    }

    #[test]
    fn epsilonized_sinc_structure_and_value() {
        let (x, eps) = (Expr::symbol("x"), epsilon_symbol());
        let sinc = x.sin() / &x;
        let safe = epsilonize(&sinc, &x, &eps, 0.0);
        let shifted = &x + sign_no_zero(&x) * &eps;
        assert_eq!(safe, shifted.sin() / &shifted);
        assert_eq!(epsilonize(&sinc, &x, &Expr::zero(), 0.0), sinc);
        let v = eval1(&safe, &[(&x, 0.0), (&eps, EpsilonPolicy::DOUBLE.value)]);
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn richardson_recovers_polynomial_limit() {
        let l = richardson(|h| 2.0 + 3.0 * h - h * h);
        assert!((l.value - 2.0).abs() < 1e-12, "{l:?}");
    }
}
