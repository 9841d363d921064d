use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::report::{relative_error, BenchReport};
use super::timing::median_ns;
use crate::error::Result;
use crate::expr::Expr;
use crate::geometry::{Element, ElementType, Pose3};
use crate::optimizer::{lm_optimize, Assembler, Assembly, Factor, LMParams, OptimizationResult, Values};
use crate::tangent_diff::{generate_linearization, JacobianMethod, SymbolicFunction};

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationConfig {
    pub seed: u64,
    pub poses: usize,
    pub landmarks: usize,
    /// Standard deviation of each landmark measurement coordinate.
    pub sigma_point: f64,
    /// Standard deviation of each odometry tangent coordinate.
    pub sigma_odom: f64,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        LocalizationConfig {
            seed: 0,
            poses: 5,
            landmarks: 20,
            sigma_point: 0.05,
            sigma_odom: 0.02,
        }
    }
}

pub fn pose_key(k: usize) -> String {
    format!("pose_{k}")
}

fn landmark_key(j: usize) -> String {
    format!("landmark_{j}")
}

fn measurement_key(k: usize, j: usize) -> String {
    format!("measurement_{k}_{j}")
}

fn odometry_key(k: usize) -> String {
    format!("odometry_{k}")
}

const POINT_WEIGHT: &str = "point_weight";
const ODOM_WEIGHT: &str = "odom_weight";

fn as_pose(e: &Element<Expr>) -> &Pose3<Expr> {
    match e {
        Element::Pose3(p) => p,
        other => panic!("expected Pose3, got {}", other.element_type()),
    }
}

fn as_point(e: &Element<Expr>) -> [Expr; 3] {
    let s = e.to_storage();
    [s[0].clone(), s[1].clone(), s[2].clone()]
}

fn as_scalar(e: &Element<Expr>) -> &Expr {
    match e {
        Element::Scalar(s) => s,
        other => panic!("expected scalar, got {}", other.element_type()),
    }
}

/// `w * (pose^-1 * landmark - measurement)`.
fn landmark_residual(pose: &Element<Expr>, landmark: &Element<Expr>, measured: &Element<Expr>, w: &Element<Expr>) -> Vec<Expr> {
    let local = as_pose(pose).inverse().transform_point(&as_point(landmark));
    let m = as_point(measured);
    let w = as_scalar(w);
    (0..3).map(|i| w * (&local[i] - &m[i])).collect()
}

/// `w * local_coordinates(measured, a^-1 * b)`.
fn odometry_residual(a: &Element<Expr>, b: &Element<Expr>, measured: &Element<Expr>, w: &Element<Expr>) -> Vec<Expr> {
    let relative = as_pose(a).inverse().compose(as_pose(b));
    let w = as_scalar(w);
    as_pose(measured)
        .local_coordinates(&relative)
        .iter()
        .map(|e| w * e)
        .collect()
}

fn landmark_function() -> SymbolicFunction {
    SymbolicFunction::new(
        "landmark_factor",
        vec![
            ("pose", ElementType::Pose3),
            ("landmark", ElementType::Vector(3)),
            ("measurement", ElementType::Vector(3)),
            ("weight", ElementType::Scalar),
        ],
        |a| Element::Vector(landmark_residual(&a[0], &a[1], &a[2], &a[3])),
    )
}

fn odometry_function() -> SymbolicFunction {
    SymbolicFunction::new(
        "odometry_factor",
        vec![
            ("a", ElementType::Pose3),
            ("b", ElementType::Pose3),
            ("measurement", ElementType::Pose3),
            ("weight", ElementType::Scalar),
        ],
        |a| Element::Vector(odometry_residual(&a[0], &a[1], &a[2], &a[3])),
    )
}

/// Whole-problem residual; inputs are every key of the problem in the
/// order of [`LocalizationProblem::fixed_keys`].
fn fixed_function(poses: usize, landmarks: usize) -> SymbolicFunction {
    let mut inputs: Vec<(String, ElementType)> = Vec::new();
    inputs.extend((0..poses).map(|k| (pose_key(k), ElementType::Pose3)));
    inputs.extend((0..landmarks).map(|j| (landmark_key(j), ElementType::Vector(3))));
    for k in 0..poses {
        inputs.extend((0..landmarks).map(|j| (measurement_key(k, j), ElementType::Vector(3))));
    }
    inputs.extend((1..poses).map(|k| (odometry_key(k), ElementType::Pose3)));
    inputs.push((POINT_WEIGHT.into(), ElementType::Scalar));
    inputs.push((ODOM_WEIGHT.into(), ElementType::Scalar));
    let refs: Vec<(&str, ElementType)> = inputs.iter().map(|(n, t)| (n.as_str(), *t)).collect();
    SymbolicFunction::new("localization", refs, move |a| {
        let landmark = |j: usize| &a[poses + j];
        let measurement = |k: usize, j: usize| &a[poses + landmarks + k * landmarks + j];
        let odometry = |k: usize| &a[poses + landmarks + poses * landmarks + k - 1];
        let (pw, ow) = (&a[a.len() - 2], &a[a.len() - 1]);
        let mut out = Vec::new();
        for k in 0..poses {
            for j in 0..landmarks {
                out.extend(landmark_residual(&a[k], landmark(j), measurement(k, j), pw));
            }
        }
        for k in 1..poses {
            out.extend(odometry_residual(&a[k - 1], &a[k], odometry(k), ow));
        }
        Element::Vector(out)
    })
}

/// Synthetic localization problem in its Dynamic (one factor per
/// measurement) and Fixed (one factor for everything) formulations.
#[derive(Clone, Debug)]
pub struct LocalizationProblem {
    pub config: LocalizationConfig,
    pub ground_truth: Values,
    /// Poses at the origin plus all constants.
    pub initial: Values,
    pub dynamic: Vec<Factor>,
    pub fixed: Vec<Factor>,
}

impl LocalizationProblem {
    pub fn dynamic_op_count(&self) -> usize {
        self.dynamic.iter().map(|f| f.kernel.op_count()).sum()
    }

    pub fn fixed_op_count(&self) -> usize {
        self.fixed.iter().map(|f| f.kernel.op_count()).sum()
    }

    /// Largest rotation angle and translation distance between a pose in
    /// `values` and its ground truth.
    pub fn pose_errors(&self, values: &Values) -> Result<(f64, f64)> {
        let (mut rot, mut trans) = (0.0f64, 0.0f64);
        for k in 0..self.config.poses {
            let d = self.ground_truth.get(&pose_key(k))?.local_coordinates(values.get(&pose_key(k))?)?;
            rot = rot.max(d[..3].iter().map(|x| x * x).sum::<f64>().sqrt());
            trans = trans.max(d[3..].iter().map(|x| x * x).sum::<f64>().sqrt());
        }
        Ok((rot, trans))
    }
}

fn weight(sigma: f64) -> f64 {
    if sigma > 0.0 {
        1.0 / sigma
    } else {
        1.0
    }
}

pub fn build_localization(config: &LocalizationConfig) -> Result<LocalizationProblem> {
    let (poses, landmarks) = (config.poses, config.landmarks);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let gauss = |sigma: f64, rng: &mut ChaCha8Rng| sigma * std_normal.sample(rng);

    let mut truth: Vec<Pose3<f64>> = Vec::with_capacity(poses);
    let first: Vec<f64> = (0..6).map(|i| gauss(if i < 3 { 0.3 } else { 1.0 }, &mut rng)).collect();
    truth.push(Pose3::identity().retract(&first));
    for k in 1..poses {
        let step: Vec<f64> = (0..6)
            .map(|i| match i {
                0..=2 => gauss(0.2, &mut rng),
                3 => 1.0 + gauss(0.2, &mut rng),
                _ => gauss(0.2, &mut rng),
            })
            .collect();
        let next = truth[k - 1].retract(&step);
        truth.push(next);
    }
    let coord = Uniform::new_inclusive(-10.0, 10.0);
    let points: Vec<[f64; 3]> = (0..landmarks)
        .map(|_| [coord.sample(&mut rng), coord.sample(&mut rng), coord.sample(&mut rng)])
        .collect();

    let mut constants = Values::new();
    for (j, p) in points.iter().enumerate() {
        constants.insert(landmark_key(j), Element::Vector(p.to_vec()));
    }
    for (k, pose) in truth.iter().enumerate() {
        let inv = pose.inverse();
        for (j, p) in points.iter().enumerate() {
            let local = inv.transform_point(p);
            let noisy = local.iter().map(|x| x + gauss(config.sigma_point, &mut rng)).collect();
            constants.insert(measurement_key(k, j), Element::Vector(noisy));
        }
    }
    for k in 1..poses {
        let relative = truth[k - 1].inverse().compose(&truth[k]);
        let noise: Vec<f64> = (0..6).map(|_| gauss(config.sigma_odom, &mut rng)).collect();
        constants.insert(odometry_key(k), Element::Pose3(relative.retract(&noise)));
    }
    constants.insert(POINT_WEIGHT, Element::Scalar(weight(config.sigma_point)));
    constants.insert(ODOM_WEIGHT, Element::Scalar(weight(config.sigma_odom)));

    let mut ground_truth = Values::new();
    let mut initial = Values::new();
    for (k, pose) in truth.iter().enumerate() {
        ground_truth.insert(pose_key(k), Element::Pose3(pose.clone()));
        initial.insert(pose_key(k), Element::Pose3(Pose3::identity()));
    }
    for (key, value) in constants.iter() {
        ground_truth.insert(key.clone(), value.clone());
        initial.insert(key.clone(), value.clone());
    }

    let method = JacobianMethod::default();
    let landmark_kernel = Arc::new(generate_linearization(&landmark_function(), &[0], method)?);
    let odometry_kernel = Arc::new(generate_linearization(&odometry_function(), &[0, 1], method)?);
    let mut dynamic = Vec::new();
    for k in 0..poses {
        for j in 0..landmarks {
            dynamic.push(Factor::new(
                landmark_kernel.clone(),
                vec![pose_key(k)],
                vec![landmark_key(j), measurement_key(k, j), POINT_WEIGHT.into()],
            )?);
        }
    }
    for k in 1..poses {
        dynamic.push(Factor::new(
            odometry_kernel.clone(),
            vec![pose_key(k - 1), pose_key(k)],
            vec![odometry_key(k), ODOM_WEIGHT.into()],
        )?);
    }

    let whole = fixed_function(poses, landmarks);
    let keys: Vec<String> = whole.inputs.iter().map(|(n, _)| n.clone()).collect();
    let optimized: Vec<usize> = (0..poses).collect();
    let fixed = vec![Factor::generate(&whole, &keys, &optimized, method)?];

    Ok(LocalizationProblem {
        config: config.clone(),
        ground_truth,
        initial,
        dynamic,
        fixed,
    })
}

/// Largest elementwise relative difference between two assemblies.
pub fn assembly_difference(a: &Assembly, b: &Assembly) -> f64 {
    let h = a
        .hessian
        .iter()
        .zip(b.hessian.iter())
        .map(|(x, y)| relative_error(*x, *y))
        .fold(0.0, f64::max);
    let r = a
        .rhs
        .iter()
        .zip(b.rhs.iter())
        .map(|(x, y)| relative_error(*x, *y))
        .fold(0.0, f64::max);
    h.max(r).max(relative_error(a.cost, b.cost))
}

#[derive(Clone, Debug)]
pub struct LocalizationOutcome {
    pub problem: LocalizationProblem,
    pub dynamic: OptimizationResult,
    pub fixed: OptimizationResult,
    /// Dynamic vs Fixed `H`, `rhs` and cost at the initial values.
    pub assembly_difference: f64,
    pub final_cost_difference: f64,
    /// `(rotation, translation)` error of the Dynamic solution.
    pub pose_error: (f64, f64),
}

pub const AGREEMENT_TOLERANCE: f64 = 1e-8;

/// One damped Gauss-Newton step with a fixed `lambda`, for timing.
fn iterate(assembler: &mut Assembler, values: &Values, lambda: f64) -> Values {
    let a = assembler.assemble(values).expect("keys are consistent");
    let mut h = a.hessian.clone();
    for i in 0..h.nrows() {
        h[(i, i)] += lambda * a.hessian[(i, i)].max(1e-12);
    }
    let delta: DVector<f64> = h.cholesky().map(|c| -c.solve(&a.rhs)).unwrap_or_else(|| DVector::zeros(a.rhs.len()));
    values.retract_all(assembler.layout(), delta.as_slice()).expect("layout matches")
}

pub fn run_localization(config: &LocalizationConfig, reps: usize) -> Result<(LocalizationOutcome, BenchReport)> {
    let problem = build_localization(config)?;
    let params = LMParams::default();
    let layout = problem.initial.layout(&(0..config.poses).map(pose_key).collect::<Vec<_>>())?;
    let mut dyn_asm = Assembler::new(&problem.dynamic, layout.clone());
    let mut fix_asm = Assembler::new(&problem.fixed, layout);
    let assembly_difference =
        assembly_difference(&dyn_asm.assemble(&problem.initial)?, &fix_asm.assemble(&problem.initial)?);

    let dynamic = lm_optimize(&problem.dynamic, &problem.initial, &params)?;
    let fixed = lm_optimize(&problem.fixed, &problem.initial, &params)?;
    let final_cost_difference = relative_error(dynamic.final_cost(), fixed.final_cost());
    let pose_error = problem.pose_errors(&dynamic.values)?;
    let correct = dynamic.status.is_success()
        && fixed.status.is_success()
        && assembly_difference <= AGREEMENT_TOLERANCE
        && final_cost_difference <= AGREEMENT_TOLERANCE;

    let mut report = BenchReport::new("localization", config.seed, reps);
    report.note("poses", config.poses);
    report.note("landmarks", config.landmarks);
    report.note("dynamic_iterations", dynamic.iterations);
    report.note("fixed_iterations", fixed.iterations);
    report.note("final_cost", format!("{:.6e}", dynamic.final_cost()));
    report.note("assembly_difference", format!("{assembly_difference:.3e}"));
    report.note("max_rotation_error", format!("{:.3e}", pose_error.0));
    report.note("max_translation_error", format!("{:.3e}", pose_error.1));
    let at = &dynamic.values;
    let (dyn_ops, fix_ops) = (problem.dynamic_op_count() as u64, problem.fixed_op_count() as u64);
    report.row("linearize_dynamic", dyn_ops, correct, || median_ns(reps, || {
        std::hint::black_box(dyn_asm.assemble(at).unwrap());
    }));
    report.row("linearize_fixed", fix_ops, correct, || median_ns(reps, || {
        std::hint::black_box(fix_asm.assemble(at).unwrap());
    }));
    report.row("iterate_dynamic", dyn_ops, correct, || median_ns(reps, || {
        std::hint::black_box(iterate(&mut dyn_asm, at, 1e-3));
    }));
    report.row("iterate_fixed", fix_ops, correct, || median_ns(reps, || {
        std::hint::black_box(iterate(&mut fix_asm, at, 1e-3));
    }));
    drop((dyn_asm, fix_asm));
    Ok((
        LocalizationOutcome {
            problem,
            dynamic,
            fixed,
            assembly_difference,
            final_cost_difference,
            pose_error,
        },
        report,
    ))
}
