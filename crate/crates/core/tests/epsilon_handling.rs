use std::collections::HashMap;

use proptest::prelude::*;
use symflat::bench::{singularity_case, SINGULARITY_NAMES};
use symflat::epsilon::{epsilon_symbol, RawValue, sign_no_zero, verify_singularity_handling, EpsilonPolicy, Stage, Verdict};
use symflat::Expr;

fn eval(e: &Expr, pairs: &[(&Expr, f64)]) -> f64 {
    let b: HashMap<Expr, f64> = pairs.iter().map(|(k, v)| ((*k).clone(), *v)).collect();
    e.evaluate(&b).unwrap()
}

#[test]
fn verdicts_for_builtin_cases() {
    let expected = [
        ("sinc", Verdict::RemovableAndHandled),
        ("inv_x", Verdict::NonRemovable),
        ("rot3_exp", Verdict::RemovableAndHandled),
        ("rot3_log", Verdict::RemovableAndHandled),
        ("sinc_bad_derivative", Verdict::Mismatch),
    ];
    assert_eq!(expected.len(), SINGULARITY_NAMES.len());
    for (name, verdict) in expected {
        let c = singularity_case(name).unwrap();
        let r = verify_singularity_handling(&c.f_safe, &c.x, &c.eps, c.x0);
        assert_eq!(r.verdict, verdict, "{name}: {r}");
    }
}

#[test]
fn sinc_limits() {
    let c = singularity_case("sinc").unwrap();
    let r = verify_singularity_handling(&c.f_safe, &c.x, &c.eps, 0.0);
    assert!((r.true_limit() - 1.0).abs() < 1e-6);
    assert!((r.eps_limit() - 1.0).abs() < 1e-6);
    assert!(r.derivative_true_limit().abs() < 1e-6);
    assert!(r.derivative_eps_limit().abs() < 1e-6);
    assert_eq!(r.raw_value_at_x0(), RawValue::NaN);
}

#[test]
fn bad_derivative_fails_in_derivative_stage() {
    let c = singularity_case("sinc_bad_derivative").unwrap();
    let r = verify_singularity_handling(&c.f_safe, &c.x, &c.eps, 0.0);
    assert_eq!(r.failed_stage, Some(Stage::Derivative));
}

#[test]
fn unknown_case() {
    assert!(singularity_case("tanh").is_err());
}

#[test]
fn sinc_error_bounded_by_epsilon() {
    let c = singularity_case("sinc").unwrap();
    let eps = EpsilonPolicy::default().value;
    let mut xs: Vec<f64> = (1..=2000).map(|i| -10.0 + 20.0 * i as f64 / 2001.0).collect();
    xs.extend((1..300).flat_map(|k| [10f64.powi(-k), -(10f64.powi(-k))]));
    for x in xs {
        let safe = eval(&c.f_safe, &[(&c.x, x), (&c.eps, eps)]);
        let exact = x.sin() / x;
        assert!((safe - exact).abs() <= eps, "x = {x:e}: {safe} vs {exact}");
    }
}

proptest! {
    #[test]
    fn snz_is_sign_with_zero_positive(x in -1e6f64..1e6) {
        let s = Expr::symbol("x");
        let v = eval(&sign_no_zero(&s), &[(&s, x)]);
        prop_assert_eq!(v, if x < 0.0 { -1.0 } else { 1.0 });
    }

    #[test]
    fn guarded_sinc_is_finite(x in -10.0f64..10.0) {
        let c = singularity_case("sinc").unwrap();
        let e = epsilon_symbol();
        prop_assert!(eval(&c.f_safe, &[(&c.x, x), (&e, EpsilonPolicy::default().value)]).is_finite());
    }
}
