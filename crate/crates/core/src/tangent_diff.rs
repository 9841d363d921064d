//! Tangent-space Jacobians of symbolic functions on Lie group arguments.
//!
//! For an argument `g` with storage `s`, the tangent Jacobian of `f` is
//! `d f(g + v) / dv` at `v = 0`, where `+` is the retraction. Two methods
//! compute it:
//!
//! * chain rule: `(d f / d s) * (d s(g + v) / d v)`, fused symbolically;
//! * first-order retraction: substitute `s <- s + D * v` into `f` (with
//!   `D = storage_D_tangent(g)`), differentiate by `v`, set `v = 0`.
//!
//! Both are exact. The second is the default because it usually produces
//! fewer operations after CSE.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::cse::{compile, InstructionProgram, KernelSignature, Shape};
use crate::epsilon::{epsilon_symbol, EpsilonPolicy};
use crate::error::{Error, Result};
use crate::expr::{add, substitute_many, Expr};
use crate::geometry::{Element, ElementType, SymMatrix};

pub type FunctionBody = dyn Fn(&[Element<Expr>]) -> Element<Expr> + Send + Sync;

/// A pure function of declared symbolic arguments.
#[derive(Clone)]
pub struct SymbolicFunction {
    pub name: String,
    pub inputs: Vec<(String, ElementType)>,
    body: Arc<FunctionBody>,
}

impl fmt::Debug for SymbolicFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolicFunction")
            .field("name", &self.name)
            .field("inputs", &self.inputs)
            .finish_non_exhaustive()
    }
}

impl SymbolicFunction {
    pub fn new<F>(name: &str, inputs: Vec<(&str, ElementType)>, body: F) -> Self
    where
        F: Fn(&[Element<Expr>]) -> Element<Expr> + Send + Sync + 'static,
    {
        SymbolicFunction {
            name: name.to_string(),
            inputs: inputs.into_iter().map(|(n, t)| (n.to_string(), t)).collect(),
            body: Arc::new(body),
        }
    }

    /// Arguments whose storage entries are the input symbols.
    pub fn symbolic_args(&self) -> Vec<Element<Expr>> {
        self.inputs.iter().map(|(n, t)| Element::symbolic(*t, n)).collect()
    }

    pub fn call(&self, args: &[Element<Expr>]) -> Element<Expr> {
        (self.body)(args)
    }

    /// Output on the symbolic arguments.
    pub fn output(&self) -> Element<Expr> {
        self.call(&self.symbolic_args())
    }

    /// Output flattened to a vector; fails unless the output is a scalar,
    /// a vector or a single-column matrix.
    pub fn output_vector(&self) -> Result<Vec<Expr>> {
        vector_entries(self.output())
    }

    fn check_arg(&self, index: usize) -> Result<(String, ElementType)> {
        let (name, ty) = self.inputs.get(index).cloned().ok_or(Error::ArgumentIndex {
            index,
            count: self.inputs.len(),
        })?;
        if !ty.is_lie_group() {
            return Err(Error::NotLieGroup(format!("argument `{name}` of type {ty}")));
        }
        Ok((name, ty))
    }
}

fn vector_entries(out: Element<Expr>) -> Result<Vec<Expr>> {
    match out {
        Element::Scalar(e) => Ok(vec![e]),
        Element::Vector(v) => Ok(v),
        Element::Matrix { cols: 1, data, .. } => Ok(data),
        other => Err(Error::NonVectorResidual(other.element_type().to_string())),
    }
}

/// Symbols standing for a tangent perturbation of the argument `name`.
fn perturbation_symbols(name: &str, dim: usize) -> Vec<Expr> {
    (0..dim).map(|i| Expr::symbol(&format!("__delta_{name}[{i}]"))).collect()
}

fn zero_bindings(symbols: &[Expr]) -> HashMap<Expr, Expr> {
    symbols.iter().map(|s| (s.clone(), Expr::zero())).collect()
}

/// `d storage(g + v) / dv` at `v = 0`, for a symbolic `g`.
///
/// The epsilon guard inside `exp` is replaced by the default numeric epsilon,
/// so the result contains only storage symbols of `g`.
pub fn storage_d_tangent(g: &Element<Expr>) -> Result<SymMatrix> {
    let ty = g.element_type();
    let dim = ty.tangent_dim()?;
    let v = perturbation_symbols("g", dim);
    let perturbed = SymMatrix::column(g.retract(&v)?.to_storage());
    let mut at_zero = zero_bindings(&v);
    at_zero.insert(epsilon_symbol(), Expr::float(EpsilonPolicy::DOUBLE.value));
    Ok(perturbed.jacobian(&v).substitute(&at_zero))
}

/// Which of the two exact tangent-Jacobian methods to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum JacobianMethod {
    ChainRule,
    #[default]
    FirstOrderRetraction,
}

/// Tangent Jacobian of a vector-valued `f` with respect to argument `index`,
/// `n x tangent_dim`.
pub fn jacobian(f: &SymbolicFunction, index: usize, method: JacobianMethod) -> Result<SymMatrix> {
    match method {
        JacobianMethod::ChainRule => jacobian_chain_rule(f, index),
        JacobianMethod::FirstOrderRetraction => jacobian_first_order_retraction(f, index),
    }
}

pub fn jacobian_chain_rule(f: &SymbolicFunction, index: usize) -> Result<SymMatrix> {
    f.check_arg(index)?;
    chain_rule(f, f.output_vector()?, index)
}

pub fn jacobian_first_order_retraction(f: &SymbolicFunction, index: usize) -> Result<SymMatrix> {
    f.check_arg(index)?;
    first_order_retraction(f, f.output_vector()?, index)
}

fn chain_rule(f: &SymbolicFunction, out: Vec<Expr>, index: usize) -> Result<SymMatrix> {
    f.check_arg(index)?;
    let args = f.symbolic_args();
    let out = SymMatrix::column(out);
    let storage = args[index].to_storage();
    let d_storage = out.jacobian(&storage);
    d_storage.matmul(&storage_d_tangent(&args[index])?)
}

fn first_order_retraction(f: &SymbolicFunction, out: Vec<Expr>, index: usize) -> Result<SymMatrix> {
    let (name, ty) = f.check_arg(index)?;
    let args = f.symbolic_args();
    let v = perturbation_symbols(&name, ty.tangent_dim()?);
    let d = storage_d_tangent(&args[index])?;
    let delta = d.matmul(&SymMatrix::column(v.clone()))?;
    let storage = args[index].to_storage();
    let shift: HashMap<Expr, Expr> = storage
        .iter()
        .zip(delta.entries())
        .map(|(s, dv)| (s.clone(), s + dv))
        .collect();
    let shifted = SymMatrix::column(substitute_many(&out, &shift));
    Ok(shifted.jacobian(&v).substitute(&zero_bindings(&v)))
}

/// `d local_coordinates(g, g') / d storage(g')` at `g' = g`: the left inverse
/// of [`storage_d_tangent`] for unit quaternions.
pub fn tangent_d_storage(g: &Element<Expr>) -> Result<SymMatrix> {
    let d = storage_d_tangent(g)?;
    let quaternion_rows = match g.element_type() {
        ElementType::Rot3 | ElementType::Pose3 => 4,
        _ => 0,
    };
    let four = Expr::int(4);
    Ok(SymMatrix::from_fn(d.cols(), d.rows(), |i, j| {
        if j < quaternion_rows {
            &four * d.get(j, i)
        } else {
            d.get(j, i).clone()
        }
    }))
}

/// Tangent-to-tangent Jacobian of a group-valued `f`:
/// `d local_coordinates(f(g), f(g + v)) / dv` at `v = 0`.
pub fn group_jacobian(f: &SymbolicFunction, index: usize, method: JacobianMethod) -> Result<SymMatrix> {
    let out = f.output();
    if !out.element_type().is_lie_group() {
        return Err(Error::NotLieGroup(format!("output of `{}`", f.name)));
    }
    let storage = out.to_storage();
    let d_storage = match method {
        JacobianMethod::ChainRule => chain_rule(f, storage, index)?,
        JacobianMethod::FirstOrderRetraction => first_order_retraction(f, storage, index)?,
    };
    tangent_d_storage(&out)?.matmul(&d_storage)
}

/// Jacobians for several arguments, stacked left to right in the given order.
pub fn stacked_jacobian(f: &SymbolicFunction, indices: &[usize], method: JacobianMethod) -> Result<SymMatrix> {
    let blocks = indices
        .iter()
        .map(|&i| jacobian(f, i, method))
        .collect::<Result<Vec<_>>>()?;
    if blocks.is_empty() {
        return Err(Error::Invalid("no optimized arguments".into()));
    }
    SymMatrix::hstack(&blocks)
}

/// Compiled kernel computing residual `b`, Jacobian `J`, `J^T J` and `J^T b`
/// for a residual function.
#[derive(Clone, Debug)]
pub struct LinearizationKernel {
    pub program: InstructionProgram,
    pub residual_dim: usize,
    pub tangent_dim: usize,
    /// Indices into the function's inputs, in kernel input order: optimized
    /// arguments first, then the rest in declared order.
    pub input_order: Vec<usize>,
    pub num_optimized: usize,
}

/// Numeric outputs of a [`LinearizationKernel`].
#[derive(Clone, Debug, PartialEq)]
pub struct Linearization {
    pub residual: Vec<f64>,
    /// Row-major `n x t`.
    pub jacobian: Vec<f64>,
    /// Row-major `t x t`.
    pub hessian: Vec<f64>,
    pub rhs: Vec<f64>,
}

/// Uncompiled linearization outputs: `b`, row-major `J`, row-major `J^T J`
/// and `J^T b`, concatenated.
#[derive(Clone, Debug)]
pub struct LinearizationExprs {
    pub outputs: Vec<Expr>,
    pub residual_dim: usize,
    pub tangent_dim: usize,
}

pub fn linearization_exprs(
    f: &SymbolicFunction,
    optimized: &[usize],
    method: JacobianMethod,
) -> Result<LinearizationExprs> {
    let residual = f.output_vector()?;
    let j = stacked_jacobian(f, optimized, method)?;
    let (n, t) = (residual.len(), j.cols());

    let column = |c: usize| -> Vec<&Expr> { (0..n).map(|r| j.get(r, c)).collect() };
    let dot = |a: &[&Expr], b: &[&Expr]| -> Expr {
        add(a.iter()
            .zip(b)
            .filter(|(x, y)| !x.is_zero() && !y.is_zero())
            .map(|(x, y)| *x * *y))
    };
    let columns: Vec<Vec<&Expr>> = (0..t).map(column).collect();
    let mut hessian = vec![Expr::zero(); t * t];
    for a in 0..t {
        for b in a..t {
            let h = dot(&columns[a], &columns[b]);
            hessian[a * t + b] = h.clone();
            hessian[b * t + a] = h;
        }
    }
    let residual_refs: Vec<&Expr> = residual.iter().collect();
    let rhs: Vec<Expr> = columns.iter().map(|c| dot(c, &residual_refs)).collect();

    let mut outputs = residual;
    outputs.extend(j.entries().iter().cloned());
    outputs.extend(hessian);
    outputs.extend(rhs);
    Ok(LinearizationExprs {
        outputs,
        residual_dim: n,
        tangent_dim: t,
    })
}

/// Builds `b`, `J`, `J^T J` and `J^T b` symbolically and compiles them into
/// one program with shared subexpressions.
pub fn generate_linearization(
    f: &SymbolicFunction,
    optimized: &[usize],
    method: JacobianMethod,
) -> Result<LinearizationKernel> {
    let exprs = linearization_exprs(f, optimized, method)?;
    let (n, t) = (exprs.residual_dim, exprs.tangent_dim);
    let mut input_order: Vec<usize> = optimized.to_vec();
    input_order.extend((0..f.inputs.len()).filter(|i| !optimized.contains(i)));
    let mut sig = KernelSignature::new(&f.name);
    for &i in &input_order {
        let (name, ty) = &f.inputs[i];
        sig = sig.input(name, ty.shape());
    }
    let sig = sig
        .output("res", Shape::vector(n))
        .output("jacobian", Shape::Matrix { rows: n, cols: t })
        .output("hessian", Shape::Matrix { rows: t, cols: t })
        .output("rhs", Shape::vector(t));
    Ok(LinearizationKernel {
        program: compile(sig, &exprs.outputs)?,
        residual_dim: n,
        tangent_dim: t,
        input_order,
        num_optimized: optimized.len(),
    })
}

impl LinearizationKernel {
    /// Runs the kernel on flat storage concatenated in kernel input order.
    pub fn linearize_flat(&self, inputs: &[f64], ws: &mut crate::cse::Workspace) -> Result<Linearization> {
        let (n, t) = (self.residual_dim, self.tangent_dim);
        let mut out = vec![0.0; n + n * t + t * t + t];
        self.program.execute_flat(inputs, ws, &mut out)?;
        let rhs = out.split_off(n + n * t + t * t);
        let hessian = out.split_off(n + n * t);
        let jacobian = out.split_off(n);
        Ok(Linearization {
            residual: out,
            jacobian,
            hessian,
            rhs,
        })
    }

    pub fn op_count(&self) -> usize {
        self.program.op_count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose3, Rot3};

    fn eval_matrix(m: &SymMatrix, bindings: &HashMap<Expr, f64>) -> Vec<f64> {
        m.evaluate(bindings).unwrap()
    }

    #[test]
    fn rot3_storage_d_tangent_at_identity() {
        let g = Element::symbolic(ElementType::Rot3, "R");
        let d = storage_d_tangent(&g).unwrap();
        assert_eq!((d.rows(), d.cols()), (4, 3));
        let bindings: HashMap<Expr, f64> = g
            .to_storage()
            .into_iter()
            .zip(Rot3::<f64>::identity().to_storage())
            .collect();
        let v = eval_matrix(&d, &bindings);
        let expected = [0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{v:?}");
        }
    }

    #[test]
    fn pose3_storage_d_tangent_has_zero_cross_blocks() {
        let g = Element::symbolic(ElementType::Pose3, "T");
        let d = storage_d_tangent(&g).unwrap();
        assert_eq!((d.rows(), d.cols()), (7, 6));
        for r in 0..4 {
            for c in 3..6 {
                assert!(d.get(r, c).is_zero());
            }
        }
        for r in 4..7 {
            for c in 0..3 {
                assert!(d.get(r, c).is_zero());
            }
        }
    }

    #[test]
    fn constant_function_has_zero_jacobian() {
        let f = SymbolicFunction::new("c", vec![("R", ElementType::Rot3)], |_| {
            Element::Vector(vec![Expr::int(3), Expr::int(4)])
        });
        for m in [JacobianMethod::ChainRule, JacobianMethod::FirstOrderRetraction] {
            let j = jacobian(&f, 0, m).unwrap();
            assert_eq!((j.rows(), j.cols()), (2, 3));
            assert!(j.entries().iter().all(Expr::is_zero));
        }
    }

    #[test]
    fn errors() {
        let f = SymbolicFunction::new("m", vec![("M", ElementType::Matrix(2, 2))], |a| a[0].clone());
        assert!(matches!(jacobian(&f, 0, JacobianMethod::default()), Err(Error::NotLieGroup(_))));
        assert!(matches!(jacobian(&f, 3, JacobianMethod::default()), Err(Error::ArgumentIndex { .. })));
        let g = SymbolicFunction::new("g", vec![("R", ElementType::Rot3)], |a| a[0].clone());
        assert!(matches!(
            generate_linearization(&g, &[0], JacobianMethod::default()),
            Err(Error::NonVectorResidual(_))
        ));
    }

    #[test]
    fn zero_residual_kernel_outputs_zeros() {
        let f = SymbolicFunction::new("z", vec![("T", ElementType::Pose3)], |_| {
            Element::Vector(vec![Expr::zero(); 3])
        });
        let k = generate_linearization(&f, &[0], JacobianMethod::default()).unwrap();
        let storage = Pose3::<f64>::identity().to_storage();
        let lin = k.linearize_flat(&storage, &mut k.program.workspace()).unwrap();
        assert!(lin.residual.iter().chain(&lin.jacobian).chain(&lin.hessian).chain(&lin.rhs).all(|v| *v == 0.0));
        assert_eq!(k.op_count(), 0);
    }
}
