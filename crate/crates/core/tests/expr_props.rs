use std::collections::HashMap;

use proptest::prelude::*;
use symflat::cse::{compile, KernelSignature, Shape};
use symflat::expr::{count_ops, count_ops_many, CountMode};
use symflat::Expr;

const SYMBOLS: usize = 5;

/// Expression tree kept outside the library, evaluated directly.
#[derive(Clone, Debug)]
enum Tree {
    Sym(usize),
    Int(i64),
    Add(Box<Tree>, Box<Tree>),
    Sub(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    /// `a / (b^2 + 1)`
    Div(Box<Tree>, Box<Tree>),
    Square(Box<Tree>),
    Sin(Box<Tree>),
    Neg(Box<Tree>),
}

fn tree() -> impl Strategy<Value = Tree> {
    let leaf = prop_oneof![(0..SYMBOLS).prop_map(Tree::Sym), (-3i64..=3).prop_map(Tree::Int)];
    leaf.prop_recursive(4, 32, 2, |inner| {
        let pair = (inner.clone(), inner.clone());
        prop_oneof![
            pair.clone().prop_map(|(a, b)| Tree::Add(a.into(), b.into())),
            pair.clone().prop_map(|(a, b)| Tree::Sub(a.into(), b.into())),
            pair.clone().prop_map(|(a, b)| Tree::Mul(a.into(), b.into())),
            pair.prop_map(|(a, b)| Tree::Div(a.into(), b.into())),
            inner.clone().prop_map(|a| Tree::Square(a.into())),
            inner.clone().prop_map(|a| Tree::Sin(a.into())),
            inner.prop_map(|a| Tree::Neg(a.into())),
        ]
    })
}

fn symbol(i: usize) -> Expr {
    Expr::symbol(&format!("s{i}"))
}

fn build(t: &Tree) -> Expr {
    match t {
        Tree::Sym(i) => symbol(*i),
        Tree::Int(v) => Expr::int(*v),
        Tree::Add(a, b) => build(a) + build(b),
        Tree::Sub(a, b) => build(a) - build(b),
        Tree::Mul(a, b) => build(a) * build(b),
        Tree::Div(a, b) => build(a) / (build(b).powi(2) + 1.0),
        Tree::Square(a) => build(a).powi(2),
        Tree::Sin(a) => build(a).sin(),
        Tree::Neg(a) => -build(a),
    }
}

/// Value and derivative with respect to symbol 0 (forward-mode dual numbers).
fn dual(t: &Tree, x: &[f64]) -> (f64, f64) {
    match t {
        Tree::Sym(i) => (x[*i], if *i == 0 { 1.0 } else { 0.0 }),
        Tree::Int(v) => (*v as f64, 0.0),
        Tree::Add(a, b) => {
            let ((u, du), (v, dv)) = (dual(a, x), dual(b, x));
            (u + v, du + dv)
        }
        Tree::Sub(a, b) => {
            let ((u, du), (v, dv)) = (dual(a, x), dual(b, x));
            (u - v, du - dv)
        }
        Tree::Mul(a, b) => {
            let ((u, du), (v, dv)) = (dual(a, x), dual(b, x));
            (u * v, du * v + u * dv)
        }
        Tree::Div(a, b) => {
            let ((u, du), (v, dv)) = (dual(a, x), dual(b, x));
            let d = v * v + 1.0;
            (u / d, (du * d - u * 2.0 * v * dv) / (d * d))
        }
        Tree::Square(a) => {
            let (u, du) = dual(a, x);
            (u * u, 2.0 * u * du)
        }
        Tree::Sin(a) => {
            let (u, du) = dual(a, x);
            (u.sin(), u.cos() * du)
        }
        Tree::Neg(a) => {
            let (u, du) = dual(a, x);
            (-u, -du)
        }
    }
}

/// Sum of absolute values of all intermediate results; bounds the
/// cancellation error any evaluation order can incur.
fn magnitude(t: &Tree, x: &[f64]) -> f64 {
    let own = dual(t, x).0.abs();
    own + match t {
        Tree::Sym(_) | Tree::Int(_) => 0.0,
        Tree::Add(a, b) | Tree::Sub(a, b) | Tree::Mul(a, b) | Tree::Div(a, b) => magnitude(a, x) * magnitude(b, x).max(1.0) + magnitude(b, x),
        Tree::Square(a) | Tree::Sin(a) | Tree::Neg(a) => magnitude(a, x).powi(2).max(magnitude(a, x)),
    }
}

fn bindings(x: &[f64]) -> HashMap<Expr, f64> {
    x.iter().enumerate().map(|(i, v)| (symbol(i), *v)).collect()
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, SYMBOLS)
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-10 * scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn canonical_form_preserves_value(t in tree(), x in point()) {
        let got = build(&t).evaluate(&bindings(&x)).unwrap();
        let want = dual(&t, &x).0;
        prop_assert!(close(got, want, magnitude(&t, &x)), "{got} vs {want} for {t:?}");
    }

    #[test]
    fn derivative_matches_dual_numbers(t in tree(), x in point()) {
        let d = build(&t).diff(&symbol(0)).evaluate(&bindings(&x)).unwrap();
        let want = dual(&t, &x).1;
        let scale = magnitude(&t, &x);
        prop_assert!(close(d, want, scale * scale), "{d} vs {want} for {t:?}");
    }

    #[test]
    fn hash_consing_gives_identity(t in tree()) {
        let (a, b) = (build(&t), build(&t));
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.structural_hash(), b.structural_hash());
    }

    #[test]
    fn add_and_mul_are_canonical(t in tree(), u in tree()) {
        let (a, b) = (build(&t), build(&u));
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!((&a + &b) + 1.0, &a + (&b + 1.0));
    }

    #[test]
    fn compiled_kernel_preserves_value(ts in prop::collection::vec(tree(), 1..4), x in point()) {
        // Share subtrees between outputs so elimination has work to do.
        let mut outputs: Vec<Expr> = ts.iter().map(build).collect();
        let shared = outputs[0].clone();
        outputs.push(&shared * &shared + shared.sin());
        let mut sig = KernelSignature::new("k");
        for i in 0..SYMBOLS {
            sig = sig.input(&format!("s{i}"), Shape::Scalar);
        }
        let program = compile(sig.output("res", Shape::vector(outputs.len())), &outputs).unwrap();
        let inputs: Vec<[f64; 1]> = x.iter().map(|v| [*v]).collect();
        let refs: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
        let got = program.execute(&refs).unwrap().concat();
        let b = bindings(&x);
        for (e, g) in outputs.iter().zip(&got) {
            let want = e.evaluate(&b).unwrap();
            prop_assert!(close(*g, want, want.abs() * 1e3), "{g} vs {want}");
        }
        prop_assert!(program.op_count as u64 <= count_ops_many(&outputs, CountMode::Tree));
    }

    #[test]
    fn dag_count_never_exceeds_tree_count(t in tree()) {
        let e = build(&t);
        prop_assert!(count_ops(&e, CountMode::Dag) <= count_ops(&e, CountMode::Tree));
    }
}

#[test]
fn derivative_matches_finite_differences() {
    let (x, y) = (symbol(0), symbol(1));
    let f = (&x * &y).sin() / (x.powi(2) + 1.0) + y.powi(3) * &x;
    let d = f.diff(&x);
    for (xv, yv) in [(0.3, -1.2), (1.7, 0.4), (-0.9, 2.0)] {
        let at = |v: f64| f.evaluate(&bindings(&[v, yv])).unwrap();
        let h = 1e-5;
        let fd = (at(xv + h) - at(xv - h)) / (2.0 * h);
        let exact = d.evaluate(&bindings(&[xv, yv])).unwrap();
        assert!((fd - exact).abs() < 1e-8, "{fd} vs {exact}");
    }
}
