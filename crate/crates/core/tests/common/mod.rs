//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use symflat::bench::relative_error;
use symflat::epsilon::{epsilon_symbol, EpsilonPolicy};
use symflat::geometry::{Element, ElementType, Pose3, Rot3, SymMatrix};
use symflat::tangent_diff::{jacobian, JacobianMethod, SymbolicFunction};
use symflat::Expr;

fn vec3(v: &[Expr]) -> [Expr; 3] {
    [v[0].clone(), v[1].clone(), v[2].clone()]
}

/// `world_point - pose * local_point`.
pub fn point_residual() -> SymbolicFunction {
    SymbolicFunction::new(
        "point_residual",
        vec![
            ("pose", ElementType::Pose3),
            ("world", ElementType::Vector(3)),
            ("local", ElementType::Vector(3)),
        ],
        |a| {
            let (Element::Pose3(p), Element::Vector(w), Element::Vector(l)) = (&a[0], &a[1], &a[2]) else {
                unreachable!()
            };
            let t = p.transform_point(&vec3(l));
            Element::Vector((0..3).map(|i| &w[i] - &t[i]).collect())
        },
    )
}

/// Relative pose residual `local_coordinates(measured, a^-1 * b)`.
pub fn relative_pose_residual() -> SymbolicFunction {
    SymbolicFunction::new(
        "relative_pose",
        vec![
            ("a", ElementType::Pose3),
            ("b", ElementType::Pose3),
            ("measured", ElementType::Pose3),
        ],
        |args| {
            let (Element::Pose3(a), Element::Pose3(b), Element::Pose3(m)) = (&args[0], &args[1], &args[2]) else {
                unreachable!()
            };
            Element::Vector(m.local_coordinates(&a.inverse().compose(b)))
        },
    )
}

/// A scalar function of a rotation: `(R p)_x * (R p)_z + |R p - q|^2`.
pub fn rotation_scalar() -> SymbolicFunction {
    SymbolicFunction::new(
        "rotation_scalar",
        vec![
            ("R", ElementType::Rot3),
            ("p", ElementType::Vector(3)),
            ("q", ElementType::Vector(3)),
        ],
        |a| {
            let (Element::Rot3(r), Element::Vector(p), Element::Vector(q)) = (&a[0], &a[1], &a[2]) else {
                unreachable!()
            };
            let rp = r.rotate(&vec3(p));
            let d2 = Expr::add_all((0..3).map(|i| (&rp[i] - &q[i]).powi(2)));
            Element::Scalar(&rp[0] * &rp[2] + d2)
        },
    )
}

pub fn method_test_functions() -> Vec<(SymbolicFunction, usize)> {
    vec![
        (point_residual(), 0),
        (relative_pose_residual(), 0),
        (relative_pose_residual(), 1),
        (rotation_scalar(), 0),
    ]
}

pub fn random_element<R: Rng + ?Sized>(ty: ElementType, rng: &mut R) -> Element<f64> {
    match ty {
        ElementType::Rot3 => Element::Rot3(Rot3::random(rng)),
        ElementType::Pose3 => Element::Pose3(Pose3::random(rng, 3.0)),
        ElementType::Scalar => Element::Scalar(rng.gen_range(-2.0..2.0)),
        ElementType::Vector(n) => Element::Vector((0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()),
        ElementType::Matrix(r, c) => Element::Matrix {
            rows: r,
            cols: c,
            data: (0..r * c).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        },
    }
}

/// Random arguments for `f`. For the relative pose residual the measurement
/// is kept close to the true relative pose, as in a real pose graph.
pub fn random_args<R: Rng + ?Sized>(f: &SymbolicFunction, rng: &mut R) -> Vec<Element<f64>> {
    let mut args: Vec<Element<f64>> = f.inputs.iter().map(|(_, t)| random_element(*t, rng)).collect();
    if f.name == "relative_pose" {
        let rel = args[0].inverse().unwrap().compose(&args[1]).unwrap();
        let noise: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.3..0.3)).collect();
        args[2] = rel.retract(&noise).unwrap();
    }
    args
}

pub fn bindings(f: &SymbolicFunction, args: &[Element<f64>]) -> HashMap<Expr, f64> {
    let mut b: HashMap<Expr, f64> = f
        .symbolic_args()
        .iter()
        .zip(args)
        .flat_map(|(s, v)| s.to_storage().into_iter().zip(v.to_storage()))
        .collect();
    b.insert(epsilon_symbol(), EpsilonPolicy::default().value);
    b
}

pub fn eval_output(f: &SymbolicFunction, args: &[Element<f64>]) -> Vec<f64> {
    let b = bindings(f, args);
    f.output_vector().unwrap().iter().map(|e| e.evaluate(&b).unwrap()).collect()
}

pub fn eval_matrix(m: &SymMatrix, f: &SymbolicFunction, args: &[Element<f64>]) -> Vec<f64> {
    m.evaluate(&bindings(f, args)).unwrap()
}

/// Central differences through the retraction of argument `index`; row-major.
pub fn finite_difference(f: &SymbolicFunction, args: &[Element<f64>], index: usize, h: f64) -> Vec<f64> {
    let dim = args[index].element_type().tangent_dim().unwrap();
    let rows = eval_output(f, args).len();
    let mut j = vec![0.0; rows * dim];
    for c in 0..dim {
        let at = |s: f64| {
            let mut v = vec![0.0; dim];
            v[c] = s * h;
            let mut a = args.to_vec();
            a[index] = args[index].retract(&v).unwrap();
            eval_output(f, &a)
        };
        let (plus, minus) = (at(1.0), at(-1.0));
        for r in 0..rows {
            j[r * dim + c] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    j
}

pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| relative_error(*x, *y)).fold(0.0, f64::max)
}

/// Worst chain-rule vs first-order-retraction disagreement, and worst
/// disagreement of either method with finite differences, over `samples`
/// random inputs.
pub fn method_errors<R: Rng + ?Sized>(f: &SymbolicFunction, index: usize, samples: usize, rng: &mut R) -> (f64, f64) {
    let chain = jacobian(f, index, JacobianMethod::ChainRule).unwrap();
    let retraction = jacobian(f, index, JacobianMethod::FirstOrderRetraction).unwrap();
    let (mut equiv, mut fd) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let args = random_args(f, rng);
        let jc = eval_matrix(&chain, f, &args);
        let jr = eval_matrix(&retraction, f, &args);
        let jf = finite_difference(f, &args, index, 1e-6);
        equiv = equiv.max(max_relative_error(&jc, &jr));
        fd = fd.max(max_relative_error(&jc, &jf)).max(max_relative_error(&jr, &jf));
    }
    (equiv, fd)
}
