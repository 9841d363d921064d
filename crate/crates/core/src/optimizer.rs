//! Factor-graph least squares with tangent-space Levenberg-Marquardt.

use std::sync::Arc;

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};

use crate::cse::Workspace;
use crate::error::{Error, Result};
use crate::geometry::Element;
use crate::tangent_diff::{generate_linearization, JacobianMethod, LinearizationKernel, SymbolicFunction};

/// Named problem variables and constants, in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Values {
    entries: IndexMap<String, Element<f64>>,
}

impl Values {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: impl Into<String>, value: Element<f64>) -> Option<Element<f64>> {
        self.entries.insert(key.into(), value)
    }

    pub fn get(&self, key: &str) -> Result<&Element<f64>> {
        self.entries.get(key).ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Element<f64>)> {
        self.entries.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    /// Tangent layout over the given keys, ordered by insertion order of
    /// `self` rather than by `keys`.
    pub fn layout<S: AsRef<str>>(&self, keys: &[S]) -> Result<TangentLayout> {
        for k in keys {
            self.get(k.as_ref())?;
        }
        let mut slices = IndexMap::new();
        let mut dim = 0;
        for (key, value) in &self.entries {
            if !keys.iter().any(|k| k.as_ref() == key) {
                continue;
            }
            let d = value.element_type().tangent_dim()?;
            slices.insert(key.clone(), (dim, d));
            dim += d;
        }
        Ok(TangentLayout { slices, dim })
    }

    /// Retracts every key of `layout` by its slice of `delta`; other keys
    /// are copied unchanged.
    pub fn retract_all(&self, layout: &TangentLayout, delta: &[f64]) -> Result<Values> {
        layout.check_len(delta.len())?;
        let mut out = self.clone();
        for (key, &(offset, dim)) in &layout.slices {
            let value = self.get(key)?;
            out.entries[key.as_str()] = value.retract(&delta[offset..offset + dim])?;
        }
        Ok(out)
    }

    /// Stacked `local_coordinates(self[k], other[k])` over the keys of `layout`.
    pub fn local_coordinates_all(&self, other: &Values, layout: &TangentLayout) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(layout.dim);
        for key in layout.slices.keys() {
            out.extend(self.get(key)?.local_coordinates(other.get(key)?)?);
        }
        Ok(out)
    }
}

/// Offsets of each optimized key in the global tangent vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TangentLayout {
    slices: IndexMap<String, (usize, usize)>,
    dim: usize,
}

impl TangentLayout {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(offset, dim)` of `key`.
    pub fn slice(&self, key: &str) -> Option<(usize, usize)> {
        self.slices.get(key).copied()
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.slices.keys()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "tangent vector has {n} entries, layout has {}",
                self.dim
            )))
        }
    }
}

/// A residual block: a linearization kernel bound to keys of a [`Values`].
#[derive(Clone, Debug)]
pub struct Factor {
    pub kernel: Arc<LinearizationKernel>,
    pub optimized_keys: Vec<String>,
    pub constant_keys: Vec<String>,
}

impl Factor {
    pub fn new(kernel: Arc<LinearizationKernel>, optimized_keys: Vec<String>, constant_keys: Vec<String>) -> Result<Self> {
        let expected = kernel.program.signature.inputs.len();
        if optimized_keys.len() != kernel.num_optimized || optimized_keys.len() + constant_keys.len() != expected {
            return Err(Error::InputCount {
                expected,
                actual: optimized_keys.len() + constant_keys.len(),
            });
        }
        Ok(Factor {
            kernel,
            optimized_keys,
            constant_keys,
        })
    }

    /// Generates the kernel for `f`, binding input `i` to `keys[i]` and
    /// optimizing the inputs listed in `optimized`.
    pub fn generate<S: AsRef<str>>(
        f: &SymbolicFunction,
        keys: &[S],
        optimized: &[usize],
        method: JacobianMethod,
    ) -> Result<Self> {
        if keys.len() != f.inputs.len() {
            return Err(Error::InputCount {
                expected: f.inputs.len(),
                actual: keys.len(),
            });
        }
        let kernel = generate_linearization(f, optimized, method)?;
        let name = |i: &usize| keys[*i].as_ref().to_string();
        let optimized_keys = kernel.input_order[..kernel.num_optimized].iter().map(name).collect();
        let constant_keys = kernel.input_order[kernel.num_optimized..].iter().map(name).collect();
        Factor::new(Arc::new(kernel), optimized_keys, constant_keys)
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.optimized_keys.iter().chain(&self.constant_keys)
    }

    /// Flat kernel input gathered from `values`, type-checked against the
    /// kernel signature.
    pub fn gather(&self, values: &Values, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        for (key, (_, shape)) in self.keys().zip(&self.kernel.program.signature.inputs) {
            let value = values.get(key)?;
            let found = value.element_type().shape();
            if &found != shape {
                return Err(Error::TypeMismatch {
                    key: key.clone(),
                    expected: shape.to_string(),
                    found: found.to_string(),
                });
            }
            out.extend(value.to_storage());
        }
        Ok(())
    }

    pub fn linearize(&self, values: &Values) -> Result<LinearizedFactor> {
        self.linearize_with(values, &mut self.kernel.program.workspace(), &mut Vec::new())
    }

    fn linearize_with(&self, values: &Values, ws: &mut Workspace, buf: &mut Vec<f64>) -> Result<LinearizedFactor> {
        self.gather(values, buf)?;
        let lin = self.kernel.linearize_flat(buf, ws)?;
        let mut slices = Vec::with_capacity(self.optimized_keys.len());
        let mut offset = 0;
        for key in &self.optimized_keys {
            let dim = values.get(key)?.element_type().tangent_dim()?;
            slices.push((key.clone(), offset, dim));
            offset += dim;
        }
        Ok(LinearizedFactor {
            residual: lin.residual,
            jacobian: lin.jacobian,
            hessian: lin.hessian,
            rhs: lin.rhs,
            slices,
        })
    }
}

/// Numeric linearization of one factor in its local tangent coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizedFactor {
    pub residual: Vec<f64>,
    /// Row-major `n x t`.
    pub jacobian: Vec<f64>,
    /// Row-major `t x t`.
    pub hessian: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `(key, local offset, dim)` per optimized key.
    pub slices: Vec<(String, usize, usize)>,
}

impl LinearizedFactor {
    pub fn tangent_dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn cost(&self) -> f64 {
        0.5 * self.residual.iter().map(|b| b * b).sum::<f64>()
    }
}

/// Gauss-Newton normal equations of a whole problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Assembly {
    pub cost: f64,
    pub hessian: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub residual: Vec<f64>,
}

/// Linearizes factors and scatters them into global normal equations,
/// reusing per-factor workspaces.
#[derive(Debug)]
pub struct Assembler<'a> {
    factors: &'a [Factor],
    layout: TangentLayout,
    workspaces: Vec<Workspace>,
    buf: Vec<f64>,
}

impl<'a> Assembler<'a> {
    pub fn new(factors: &'a [Factor], layout: TangentLayout) -> Self {
        Assembler {
            factors,
            layout,
            workspaces: factors.iter().map(|f| f.kernel.program.workspace()).collect(),
            buf: Vec::new(),
        }
    }

    pub fn layout(&self) -> &TangentLayout {
        &self.layout
    }

    pub fn assemble(&mut self, values: &Values) -> Result<Assembly> {
        let n = self.layout.dim;
        let mut hessian = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        let mut residual = Vec::new();
        for (factor, ws) in self.factors.iter().zip(&mut self.workspaces) {
            let lin = factor.linearize_with(values, ws, &mut self.buf)?;
            let t = lin.tangent_dim();
            let global: Vec<Option<(usize, usize, usize)>> = lin
                .slices
                .iter()
                .map(|(key, local, dim)| self.layout.slice(key).map(|(g, _)| (*local, g, *dim)))
                .collect();
            for &(la, ga, da) in global.iter().flatten() {
                for i in 0..da {
                    rhs[ga + i] += lin.rhs[la + i];
                }
                for &(lb, gb, db) in global.iter().flatten() {
                    for i in 0..da {
                        for j in 0..db {
                            hessian[(ga + i, gb + j)] += lin.hessian[(la + i) * t + lb + j];
                        }
                    }
                }
            }
            residual.extend(lin.residual);
        }
        let cost = 0.5 * residual.iter().map(|b| b * b).sum::<f64>();
        Ok(Assembly {
            cost,
            hessian,
            rhs,
            residual,
        })
    }

    /// Cost only.
    pub fn cost(&mut self, values: &Values) -> Result<f64> {
        let mut cost = 0.0;
        for (factor, ws) in self.factors.iter().zip(&mut self.workspaces) {
            cost += factor.linearize_with(values, ws, &mut self.buf)?.cost();
        }
        Ok(cost)
    }
}

/// One-shot assembly over the union of the factors' optimized keys.
pub fn assemble(factors: &[Factor], values: &Values) -> Result<(Assembly, TangentLayout)> {
    let layout = values.layout(&optimized_keys(factors))?;
    let assembly = Assembler::new(factors, layout.clone()).assemble(values)?;
    Ok((assembly, layout))
}

fn optimized_keys(factors: &[Factor]) -> Vec<String> {
    let mut keys: Vec<String> = Vec::new();
    for k in factors.iter().flat_map(|f| &f.optimized_keys) {
        if !keys.contains(k) {
            keys.push(k.clone());
        }
    }
    keys
}

#[derive(Clone, Debug, PartialEq)]
pub struct LMParams {
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub early_exit_relative_decrease: f64,
    /// Damp with `lambda * diag(H)` if set, `lambda * I` otherwise.
    pub diagonal_damping: bool,
    pub diagonal_floor: f64,
    /// Attempts to factor the damped system before giving up.
    pub max_solve_retries: usize,
}

impl Default for LMParams {
    fn default() -> Self {
        LMParams {
            lambda_init: 1.0,
            lambda_up: 4.0,
            lambda_down: 0.5,
            max_iterations: 50,
            early_exit_relative_decrease: 1e-9,
            diagonal_damping: true,
            diagonal_floor: 1e-12,
            max_solve_retries: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizationStatus {
    Converged,
    MaxIterations,
    Failed,
}

impl OptimizationStatus {
    pub fn is_success(self) -> bool {
        self != OptimizationStatus::Failed
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub values: Values,
    /// Initial cost followed by the cost after each accepted step.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub status: OptimizationStatus,
}

impl OptimizationResult {
    pub fn final_cost(&self) -> f64 {
        *self.cost_history.last().expect("history holds the initial cost")
    }
}

/// Steps shorter than this are treated as no progress.
const MIN_STEP_NORM: f64 = 1e-12;

pub fn lm_optimize(factors: &[Factor], initial: &Values, params: &LMParams) -> Result<OptimizationResult> {
    if factors.is_empty() {
        return Err(Error::Invalid("no factors to optimize".into()));
    }
    if !(params.lambda_up > 1.0 && 1.0 > params.lambda_down && params.lambda_down > 0.0) {
        return Err(Error::Invalid("LM parameters need lambda_up > 1 > lambda_down > 0".into()));
    }
    let layout = initial.layout(&optimized_keys(factors))?;
    if layout.dim() == 0 {
        return Err(Error::Invalid("no optimized variables".into()));
    }
    let mut assembler = Assembler::new(factors, layout.clone());
    let mut values = initial.clone();
    let mut current = assembler.assemble(&values)?;
    let mut cost_history = vec![current.cost];
    let mut lambda = params.lambda_init;
    let mut iterations = 0;
    let mut status = OptimizationStatus::MaxIterations;

    while iterations < params.max_iterations {
        if current.cost == 0.0 || current.rhs.amax() == 0.0 {
            status = OptimizationStatus::Converged;
            break;
        }
        let Some(delta) = damped_step(&current, &mut lambda, params) else {
            status = OptimizationStatus::Failed;
            break;
        };
        iterations += 1;
        let candidate = values.retract_all(&layout, delta.as_slice())?;
        let cost = assembler.cost(&candidate)?;
        if cost < current.cost {
            let relative = (current.cost - cost) / current.cost;
            values = candidate;
            current = assembler.assemble(&values)?;
            cost_history.push(current.cost);
            lambda *= params.lambda_down;
            if relative < params.early_exit_relative_decrease {
                status = OptimizationStatus::Converged;
                break;
            }
        } else {
            lambda *= params.lambda_up;
            if delta.norm() < MIN_STEP_NORM {
                status = OptimizationStatus::Converged;
                break;
            }
        }
    }
    Ok(OptimizationResult {
        values,
        cost_history,
        iterations,
        status,
    })
}

/// Solves `(H + lambda * D) delta = -rhs`, raising `lambda` while the
/// damped system is not positive definite.
fn damped_step(a: &Assembly, lambda: &mut f64, params: &LMParams) -> Option<DVector<f64>> {
    let n = a.rhs.len();
    for _ in 0..params.max_solve_retries.max(1) {
        let mut damped = a.hessian.clone();
        for i in 0..n {
            let d = if params.diagonal_damping {
                a.hessian[(i, i)].max(params.diagonal_floor)
            } else {
                1.0
            };
            damped[(i, i)] += *lambda * d;
        }
        if let Some(chol) = damped.cholesky() {
            return Some(-chol.solve(&a.rhs));
        }
        *lambda *= params.lambda_up;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::geometry::ElementType;

    fn quadratic() -> (Vec<Factor>, Values) {
        let f = SymbolicFunction::new("q", vec![("x", ElementType::Scalar)], |a| {
            let Element::Scalar(x) = &a[0] else { unreachable!() };
            Element::Vector(vec![x - Expr::int(3)])
        });
        let factor = Factor::generate(&f, &["x"], &[0], JacobianMethod::default()).unwrap();
        let mut v = Values::new();
        v.insert("x", Element::Scalar(0.0));
        (vec![factor], v)
    }

    #[test]
    fn quadratic_reaches_closed_form_optimum() {
        let (factors, v) = quadratic();
        let r = lm_optimize(&factors, &v, &LMParams::default()).unwrap();
        let Element::Scalar(x) = r.values.get("x").unwrap() else { panic!() };
        assert!((x - 3.0).abs() < 1e-9, "{x}");
        assert_eq!(r.status, OptimizationStatus::Converged);
        assert!(r.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_with_light_damping_takes_few_iterations() {
        let (factors, v) = quadratic();
        let params = LMParams {
            lambda_init: 1e-12,
            ..LMParams::default()
        };
        let r = lm_optimize(&factors, &v, &params).unwrap();
        let Element::Scalar(x) = r.values.get("x").unwrap() else { panic!() };
        assert!((x - 3.0).abs() < 1e-9);
        assert!(r.iterations <= 3, "{}", r.iterations);
    }

    #[test]
    fn converged_problem_stops_immediately() {
        let (factors, mut v) = quadratic();
        v.insert("x", Element::Scalar(3.0));
        let r = lm_optimize(&factors, &v, &LMParams::default()).unwrap();
        assert!(r.iterations <= 1);
        assert_eq!(r.status, OptimizationStatus::Converged);
        assert_eq!(r.values, v);
    }

    #[test]
    fn retract_all_leaves_constant_keys_alone() {
        let mut v = Values::new();
        v.insert("a", Element::Scalar(1.0));
        v.insert("c", Element::Vector(vec![5.0, 6.0]));
        v.insert("b", Element::Vector(vec![1.0, 2.0]));
        let layout = v.layout(&["b", "a"]).unwrap();
        assert_eq!(layout.slice("a"), Some((0, 1)));
        assert_eq!(layout.slice("b"), Some((1, 2)));
        let r = v.retract_all(&layout, &[0.5, 1.0, -1.0]).unwrap();
        assert_eq!(r.get("a").unwrap(), &Element::Scalar(1.5));
        assert_eq!(r.get("b").unwrap(), &Element::Vector(vec![2.0, 1.0]));
        assert_eq!(r.get("c").unwrap(), v.get("c").unwrap());
        assert!(v.retract_all(&layout, &[0.0]).is_err());
    }

    #[test]
    fn type_and_key_errors() {
        let (factors, _) = quadratic();
        let mut v = Values::new();
        assert!(matches!(factors[0].linearize(&v), Err(Error::MissingKey(_))));
        v.insert("x", Element::Vector(vec![1.0, 2.0]));
        assert!(matches!(factors[0].linearize(&v), Err(Error::TypeMismatch { .. })));
    }
}
