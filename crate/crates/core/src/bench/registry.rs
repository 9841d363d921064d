use std::collections::HashMap;

use rand::Rng;

use super::inverse_compose::InverseComposeKernels;
use super::matmul::example_matrices;
use crate::cse::{compile, InstructionProgram, KernelSignature, Shape};
use crate::epsilon::{epsilon_symbol, sign_no_zero, EpsilonPolicy};
use crate::error::{Error, Result};
use crate::expr::{Evaluator, Expr};
use crate::geometry::{Element, ElementType, Pose3, Rot3};
use crate::tangent_diff::{generate_linearization, linearization_exprs, JacobianMethod, SymbolicFunction};

pub const KERNEL_NAMES: &[&str] = &[
    "point_residual",
    "point_factor",
    "inverse_compose",
    "pose3_inverse",
    "pose3_compose_point",
    "func_4_1",
    "snz",
    "rot3_exp",
    "rot3_log",
    "matmul_6x6",
];

/// A compiled built-in kernel together with the uncompiled output
/// expressions it was generated from.
#[derive(Clone, Debug)]
pub struct RegisteredKernel {
    pub name: &'static str,
    pub program: InstructionProgram,
    /// Outputs over the signature's input symbols, before elimination.
    pub outputs: Vec<Expr>,
}

fn point_residual() -> SymbolicFunction {
    SymbolicFunction::new(
        "point_residual",
        vec![
            ("world_T_local", ElementType::Pose3),
            ("world_point", ElementType::Vector(3)),
            ("local_point", ElementType::Vector(3)),
        ],
        |a| {
            let (Element::Pose3(pose), Element::Vector(w), Element::Vector(l)) = (&a[0], &a[1], &a[2]) else {
                unreachable!("declared argument types")
            };
            let t = pose.transform_point(&[l[0].clone(), l[1].clone(), l[2].clone()]);
            Element::Vector((0..3).map(|i| &w[i] - &t[i]).collect())
        },
    )
}

fn helper_1(a: &Expr, b: &Expr) -> Expr {
    a.powi(2) + (a / b).abs() / b.powi(2)
}

fn helper_2(a: &Expr, b: &Expr) -> Expr {
    (a / b).abs() + (a.powi(2) - b.powi(2))
}

fn scalar_kernel(name: &str, inputs: &[&str], outputs: Vec<Expr>) -> Result<InstructionProgram> {
    let mut sig = KernelSignature::new(name);
    for i in inputs {
        sig = sig.input(i, Shape::Scalar);
    }
    compile(sig.output("res", Shape::vector(outputs.len())), &outputs)
}

fn from_function(name: &'static str, f: &SymbolicFunction) -> Result<RegisteredKernel> {
    let outputs = f.output_vector()?;
    let mut sig = KernelSignature::new(&f.name);
    for (n, t) in &f.inputs {
        sig = sig.input(n, t.shape());
    }
    let program = compile(sig.output("res", Shape::vector(outputs.len())), &outputs)?;
    Ok(RegisteredKernel { name, program, outputs })
}

pub fn build_kernel(name: &str) -> Result<RegisteredKernel> {
    let Some(&name) = KERNEL_NAMES.iter().find(|&&n| n == name) else {
        return Err(Error::UnknownFunction {
            name: name.to_string(),
            valid: KERNEL_NAMES.join(", "),
        });
    };
    let (a, b) = (Expr::symbol("a"), Expr::symbol("b"));
    match name {
        "point_residual" => from_function(name, &point_residual()),
        "point_factor" => {
            let f = point_residual();
            let kernel = generate_linearization(&f, &[0], JacobianMethod::default())?;
            let outputs = linearization_exprs(&f, &[0], JacobianMethod::default())?.outputs;
            Ok(RegisteredKernel {
                name,
                program: kernel.program,
                outputs,
            })
        }
        "inverse_compose" | "pose3_inverse" | "pose3_compose_point" => {
            let k = InverseComposeKernels::build(JacobianMethod::default())?;
            let [inv, cmp, flat] = k.exprs;
            let (program, outputs) = match name {
                "inverse_compose" => (k.flattened, flat),
                "pose3_inverse" => (k.inverse, inv),
                _ => (k.compose, cmp),
            };
            Ok(RegisteredKernel { name, program, outputs })
        }
        "func_4_1" => {
            let outputs = vec![helper_1(&a, &b) - helper_2(&a, &b)];
            let program = scalar_kernel("func", &["a", "b"], outputs.clone())?;
            Ok(RegisteredKernel { name, program, outputs })
        }
        "snz" => {
            let x = Expr::symbol("x");
            let outputs = vec![sign_no_zero(&x)];
            let program = scalar_kernel("sign_no_zero", &["x"], outputs.clone())?;
            Ok(RegisteredKernel { name, program, outputs })
        }
        "rot3_exp" => {
            let f = SymbolicFunction::new("rot3_exp", vec![("omega", ElementType::Vector(3))], |a| {
                let Element::Vector(w) = &a[0] else { unreachable!() };
                Element::Rot3(Rot3::exp(&[w[0].clone(), w[1].clone(), w[2].clone()]))
            });
            let outputs = f.output().to_storage();
            let sig = KernelSignature::new("rot3_exp")
                .input("omega", Shape::vector(3))
                .output("res", ElementType::Rot3.shape());
            let program = compile(sig, &outputs)?;
            Ok(RegisteredKernel { name, program, outputs })
        }
        "rot3_log" => {
            let r = Element::symbolic(ElementType::Rot3, "rotation");
            let outputs = r.log()?;
            let sig = KernelSignature::new("rot3_log")
                .input("rotation", ElementType::Rot3.shape())
                .output("res", Shape::vector(3));
            let program = compile(sig, &outputs)?;
            Ok(RegisteredKernel { name, program, outputs })
        }
        "matmul_6x6" => {
            let (x, y) = example_matrices();
            let outputs = x.matmul(&y)?.into_entries();
            let sig = KernelSignature::new("matmul_6x6")
                .input("a", Shape::Scalar)
                .input("b", Shape::Scalar)
                .output("res", Shape::Matrix { rows: 6, cols: 6 });
            let program = compile(sig, &outputs)?;
            Ok(RegisteredKernel { name, program, outputs })
        }
        _ => unreachable!("name checked against the registry"),
    }
}

/// Random inputs for `k`: random group elements for geometry storage, and
/// values with magnitude in `[0.1, 2]` and random sign otherwise.
pub fn sample_inputs<R: Rng + ?Sized>(k: &RegisteredKernel, rng: &mut R) -> Vec<Vec<f64>> {
    k.program
        .signature
        .inputs
        .iter()
        .map(|(_, shape)| match shape {
            Shape::Element { type_name, .. } if type_name == "Rot3" => Rot3::random(rng).to_storage(),
            Shape::Element { type_name, .. } if type_name == "Pose3" => Pose3::random(rng, 5.0).to_storage(),
            s => (0..s.size())
                .map(|_| {
                    let m: f64 = rng.gen_range(0.1..2.0);
                    if rng.gen_bool(0.5) {
                        m
                    } else {
                        -m
                    }
                })
                .collect(),
        })
        .collect()
}

/// Evaluates the uncompiled outputs of `k` by direct interpretation.
pub fn tree_outputs(k: &RegisteredKernel, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut bindings: HashMap<Expr, f64> = HashMap::new();
    for ((name, shape), values) in k.program.signature.inputs.iter().zip(inputs) {
        bindings.extend(shape.symbols(name).into_iter().zip(values.iter().copied()));
    }
    bindings.insert(epsilon_symbol(), EpsilonPolicy::default().value);
    let mut ev = Evaluator::new(&bindings);
    k.outputs.iter().map(|e| ev.eval(e)).collect()
}
