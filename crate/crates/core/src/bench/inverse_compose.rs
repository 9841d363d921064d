use nalgebra::{SMatrix, SVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::report::{relative_error, BenchReport};
use super::timing::median_ns;
use crate::cse::{compile, InstructionProgram, KernelSignature, Shape};
use crate::error::Result;
use crate::expr::Expr;
use crate::geometry::{Element, ElementType, Pose3};
use crate::tangent_diff::{group_jacobian, jacobian, JacobianMethod, SymbolicFunction};

/// Symbolic count of a dense `(3, 6) x (6, 6)` product: `3 * 6 * (6 + 5)`.
pub const DENSE_3X6_6X6_OPS: usize = 198;

fn point3(e: &Element<Expr>) -> [Expr; 3] {
    let s = e.to_storage();
    [s[0].clone(), s[1].clone(), s[2].clone()]
}

fn pose(e: &Element<Expr>) -> &Pose3<Expr> {
    match e {
        Element::Pose3(p) => p,
        other => panic!("expected Pose3, got {}", other.element_type()),
    }
}

/// `(inverse, compose, flattened inverse-compose)`.
pub fn inverse_compose_functions() -> (SymbolicFunction, SymbolicFunction, SymbolicFunction) {
    let inverse = SymbolicFunction::new("pose3_inverse", vec![("pose", ElementType::Pose3)], |a| {
        Element::Pose3(pose(&a[0]).inverse())
    });
    let compose = SymbolicFunction::new(
        "pose3_compose_point",
        vec![("pose", ElementType::Pose3), ("point", ElementType::Vector(3))],
        |a| Element::Vector(pose(&a[0]).transform_point(&point3(&a[1])).to_vec()),
    );
    let flattened = SymbolicFunction::new(
        "inverse_compose",
        vec![("pose", ElementType::Pose3), ("point", ElementType::Vector(3))],
        |a| Element::Vector(pose(&a[0]).inverse().transform_point(&point3(&a[1])).to_vec()),
    );
    (inverse, compose, flattened)
}

/// The three kernels of the inverse-compose experiment, each returning its
/// value followed by its tangent Jacobian with respect to the pose.
#[derive(Clone, Debug)]
pub struct InverseComposeKernels {
    /// `pose -> (pose^-1 [7], d/dpose [6x6])`.
    pub inverse: InstructionProgram,
    /// `(pose, point) -> (pose * point [3], d/dpose [3x6])`.
    pub compose: InstructionProgram,
    /// `(pose, point) -> (pose^-1 * point [3], d/dpose [3x6])`.
    pub flattened: InstructionProgram,
    /// Uncompiled outputs of the three kernels, in the same order.
    pub exprs: [Vec<Expr>; 3],
}

impl InverseComposeKernels {
    pub fn build(method: JacobianMethod) -> Result<Self> {
        let (inverse, compose, flattened) = inverse_compose_functions();
        let pose_shape = ElementType::Pose3.shape();

        let mut outs = inverse.output().to_storage();
        outs.extend(group_jacobian(&inverse, 0, method)?.into_entries());
        let sig = KernelSignature::new(&inverse.name)
            .input("pose", pose_shape.clone())
            .output("res", pose_shape.clone())
            .output("jacobian", Shape::Matrix { rows: 6, cols: 6 });
        let inverse_program = compile(sig, &outs)?;
        let inverse_exprs = outs;

        let point_kernel = |f: &SymbolicFunction| -> Result<(InstructionProgram, Vec<Expr>)> {
            let mut outs = f.output_vector()?;
            outs.extend(jacobian(f, 0, method)?.into_entries());
            let sig = KernelSignature::new(&f.name)
                .input("pose", pose_shape.clone())
                .input("point", Shape::vector(3))
                .output("res", Shape::vector(3))
                .output("jacobian", Shape::Matrix { rows: 3, cols: 6 });
            Ok((compile(sig, &outs)?, outs))
        };
        let (compose, compose_exprs) = point_kernel(&compose)?;
        let (flattened, flattened_exprs) = point_kernel(&flattened)?;
        Ok(InverseComposeKernels {
            inverse: inverse_program,
            compose,
            flattened,
            exprs: [inverse_exprs, compose_exprs, flattened_exprs],
        })
    }

    /// Operation count of the chained approach: both kernels plus the
    /// runtime Jacobian product.
    pub fn chained_op_count(&self) -> usize {
        self.inverse.op_count + self.compose.op_count + DENSE_3X6_6X6_OPS
    }
}

type Jac = SMatrix<f64, 3, 6>;

struct Evaluators<'a> {
    k: &'a InverseComposeKernels,
    ws_inv: crate::cse::Workspace,
    ws_cmp: crate::cse::Workspace,
    ws_flat: crate::cse::Workspace,
    inv_out: [f64; 7 + 36],
    cmp_in: [f64; 10],
    cmp_out: [f64; 3 + 18],
}

impl<'a> Evaluators<'a> {
    fn new(k: &'a InverseComposeKernels) -> Self {
        Evaluators {
            k,
            ws_inv: k.inverse.workspace(),
            ws_cmp: k.compose.workspace(),
            ws_flat: k.flattened.workspace(),
            inv_out: [0.0; 43],
            cmp_in: [0.0; 10],
            cmp_out: [0.0; 21],
        }
    }

    /// Chained value and Jacobian for flat input `[pose(7), point(3)]`.
    fn chained(&mut self, input: &[f64]) -> (SVector<f64, 3>, Jac) {
        self.k
            .inverse
            .execute_flat(&input[..7], &mut self.ws_inv, &mut self.inv_out)
            .expect("inverse kernel shape");
        self.cmp_in[..7].copy_from_slice(&self.inv_out[..7]);
        self.cmp_in[7..].copy_from_slice(&input[7..]);
        self.k
            .compose
            .execute_flat(&self.cmp_in, &mut self.ws_cmp, &mut self.cmp_out)
            .expect("compose kernel shape");
        let j_inv = SMatrix::<f64, 6, 6>::from_row_slice(&self.inv_out[7..]);
        let j_cmp = Jac::from_row_slice(&self.cmp_out[3..]);
        (SVector::<f64, 3>::from_column_slice(&self.cmp_out[..3]), j_cmp * j_inv)
    }

    fn flattened(&mut self, input: &[f64], out: &mut [f64; 21]) {
        self.k
            .flattened
            .execute_flat(input, &mut self.ws_flat, out)
            .expect("flattened kernel shape");
    }
}

fn random_input(rng: &mut ChaCha8Rng) -> Vec<f64> {
    use rand::Rng;
    let mut v = Pose3::random(rng, 5.0).to_storage();
    v.extend((0..3).map(|_| rng.gen_range(-5.0..5.0)));
    v
}

/// Central differences of the flattened value under the pose retraction.
fn finite_difference_jacobian(k: &InverseComposeKernels, input: &[f64], h: f64) -> Jac {
    let mut ws = k.flattened.workspace();
    let mut out = [0.0; 21];
    let pose = Element::Pose3(Pose3::from_storage(&input[..7]));
    let mut value = |dv: &[f64]| -> SVector<f64, 3> {
        let mut x = pose.retract(dv).expect("pose tangent").to_storage();
        x.extend_from_slice(&input[7..]);
        k.flattened.execute_flat(&x, &mut ws, &mut out).expect("flattened kernel shape");
        SVector::<f64, 3>::from_column_slice(&out[..3])
    };
    let mut j = Jac::zeros();
    for c in 0..6 {
        let mut dv = [0.0; 6];
        dv[c] = h;
        let plus = value(&dv);
        dv[c] = -h;
        let minus = value(&dv);
        j.set_column(c, &((plus - minus) / (2.0 * h)));
    }
    j
}

/// Worst chained-vs-flattened and finite-difference-vs-flattened Jacobian
/// errors over `samples` random inputs.
pub fn validate_inverse_compose(k: &InverseComposeKernels, seed: u64, samples: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ev = Evaluators::new(k);
    let mut out = [0.0; 21];
    let (mut chain_err, mut fd_err) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let input = random_input(&mut rng);
        let (value, j_chain) = ev.chained(&input);
        ev.flattened(&input, &mut out);
        let j_flat = Jac::from_row_slice(&out[3..]);
        for i in 0..3 {
            chain_err = chain_err.max(relative_error(value[i], out[i]));
        }
        for (a, b) in j_chain.iter().zip(j_flat.iter()) {
            chain_err = chain_err.max(relative_error(*a, *b));
        }
        let j_fd = finite_difference_jacobian(k, &input, 1e-6);
        for (a, b) in j_fd.iter().zip(j_flat.iter()) {
            fd_err = fd_err.max(relative_error(*a, *b));
        }
    }
    (chain_err, fd_err)
}

pub const CHAIN_TOLERANCE: f64 = 1e-10;
pub const FINITE_DIFFERENCE_TOLERANCE: f64 = 1e-6;

/// Builds the three kernels, validates them, and times the chained and
/// flattened evaluations.
pub fn run_inverse_compose(seed: u64, reps: usize) -> Result<(InverseComposeKernels, BenchReport)> {
    let k = InverseComposeKernels::build(JacobianMethod::FirstOrderRetraction)?;
    let (chain_err, fd_err) = validate_inverse_compose(&k, seed, 100);
    let correct = chain_err <= CHAIN_TOLERANCE && fd_err <= FINITE_DIFFERENCE_TOLERANCE;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = random_input(&mut rng);
    let mut report = BenchReport::new("inverse_compose", seed, reps);
    let mut ev = Evaluators::new(&k);
    report.row("inverse+jacobian", k.inverse.op_count as u64, correct, || {
        let mut out = [0.0; 43];
        let mut ws = k.inverse.workspace();
        median_ns(reps, || k.inverse.execute_flat(&input[..7], &mut ws, &mut out).unwrap())
    });
    report.row("compose+jacobian", k.compose.op_count as u64, correct, || {
        let mut out = [0.0; 21];
        let mut ws = k.compose.workspace();
        median_ns(reps, || k.compose.execute_flat(&input, &mut ws, &mut out).unwrap())
    });
    report.row("chained", k.chained_op_count() as u64, correct, || {
        median_ns(reps, || {
            std::hint::black_box(ev.chained(&input));
        })
    });
    let mut ev = Evaluators::new(&k);
    report.row("flattened", k.flattened.op_count as u64, correct, || {
        let mut out = [0.0; 21];
        median_ns(reps, || ev.flattened(&input, &mut out))
    });
    report.note("dense_multiply_ops", DENSE_3X6_6X6_OPS);
    report.note("max_chain_error", format!("{chain_err:.3e}"));
    report.note("max_finite_difference_error", format!("{fd_err:.3e}"));
    Ok((k, report))
}
