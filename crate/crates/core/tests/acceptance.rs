//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symflat::bench::*;
use symflat::epsilon::{verify_singularity_handling, EpsilonPolicy, Verdict};
use symflat::expr::Evaluator;
use symflat::geometry::{Element, Pose3, Rot3};
use symflat::tangent_diff::JacobianMethod;
use symflat::{Expr, Result};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = fn() -> Result<Outcome>;

fn check(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn single_inputs(values: &[f64]) -> Vec<&[f64]> {
    values.iter().map(std::slice::from_ref).collect()
}

fn flattening_example() -> Result<Outcome> {
    let start = Instant::now();
    let k = build_kernel("func_4_1")?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut err = 0.0f64;
    for _ in 0..1000 {
        let a: f64 = rng.gen_range(-2.0..2.0);
        let b: f64 = rng.gen_range(0.1..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let h1 = a * a + (a / b).abs() / (b * b);
        let h2 = (a / b).abs() + (a * a - b * b);
        let got = k.program.execute(&single_inputs(&[a, b]))?[0][0];
        err = err.max(relative_error(got, h1 - h2));
    }
    let elapsed = start.elapsed();
    let (temps, ops) = (k.program.num_temps(), k.program.op_count);
    check(
        temps == 2 && ops <= 7 && err <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("temps={temps} ops={ops} max_rel_err={err:.2e} time={elapsed:.2?}"),
    )
}

fn sparsity_example() -> Result<Outcome> {
    let (x, y) = example_matrices();
    let symbols = [Expr::symbol("a"), Expr::symbol("b")];
    let (out, _) = run_matmul("example", &x, &y, &symbols, false, 0, 1)?;
    // Brute-force dense symbolic product, interpreted directly.
    let dense: Vec<Expr> = (0..6)
        .flat_map(|i| (0..6).map(move |j| (i, j)))
        .map(|(i, j)| Expr::add_all((0..6).map(|k| x.get(i, k) * y.get(k, j))))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut err = 0.0f64;
    for _ in 0..100 {
        let v = [rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
        let bindings: HashMap<Expr, f64> = symbols.iter().cloned().zip(v).collect();
        let mut ev = Evaluator::new(&bindings);
        let got = out.flattened.execute(&single_inputs(&v))?.concat();
        for (g, e) in got.iter().zip(&dense) {
            err = err.max(relative_error(*g, ev.eval(e)?));
        }
    }
    let ops = out.flattened.op_count;
    check(
        ops <= 45 && out.per_occurrence_ops >= 390 && err <= 1e-9 && out.max_error <= 1e-9,
        format!("ops={ops} per_occurrence={} max_rel_err={err:.2e}", out.per_occurrence_ops),
    )
}

fn inverse_compose_ledger() -> Result<Outcome> {
    let k = InverseComposeKernels::build(JacobianMethod::default())?;
    let (inv, cmp, flat) = (k.inverse.op_count, k.compose.op_count, k.flattened.op_count);
    let chained = inv + cmp + DENSE_3X6_6X6_OPS;
    let (_, fd_err) = validate_inverse_compose(&k, 3, 100);
    let pass = (55..=95).contains(&inv)
        && (65..=110).contains(&cmp)
        && (70..=130).contains(&flat)
        && 3 * flat < chained
        && fd_err <= 1e-6;
    check(
        pass,
        format!("inverse={inv} compose={cmp} flattened={flat} chained={chained} fd_err={fd_err:.2e}"),
    )
}

fn method_equivalence() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pass = true;
    let mut parts = Vec::new();
    let functions = common::method_test_functions();
    for (f, index) in &functions {
        let (equiv, fd) = common::method_errors(f, *index, 100, &mut rng);
        pass &= equiv <= 1e-10 && fd <= 1e-6;
        parts.push(format!("{}[{index}] equiv={equiv:.1e} fd={fd:.1e}", f.name));
    }
    check(pass && functions.len() >= 3, parts.join("; "))
}

fn rotation_close(a: &Rot3<f64>, b: &Rot3<f64>) -> f64 {
    let (ma, mb) = (a.to_rotation_matrix(), b.to_rotation_matrix());
    (0..9).map(|i| (ma[i / 3][i % 3] - mb[i / 3][i % 3]).abs()).fold(0.0, f64::max)
}

fn pose_close(a: &Pose3<f64>, b: &Pose3<f64>) -> f64 {
    let t = (0..3).map(|i| relative_error(a.translation[i], b.translation[i])).fold(0.0, f64::max);
    rotation_close(&a.rotation, &b.rotation).max(t)
}

fn geometry_axioms() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut group, mut explog, mut ortho) = (0.0f64, 0.0f64, 0.0f64);
    let mut storage_exact = true;
    for _ in 0..1000 {
        let [a, b, c] = [0; 3].map(|_| Pose3::random(&mut rng, 10.0));
        group = group
            .max(pose_close(&a.compose(&b).compose(&c), &a.compose(&b.compose(&c))))
            .max(pose_close(&a.compose(&Pose3::identity()), &a))
            .max(pose_close(&Pose3::identity().compose(&a), &a))
            .max(pose_close(&a.compose(&a.inverse()), &Pose3::identity()));
        let (r, s) = (&a.rotation, &b.rotation);
        group = group
            .max(rotation_close(&r.compose(s).compose(&c.rotation), &r.compose(&s.compose(&c.rotation))))
            .max(rotation_close(&r.inverse().compose(r), &Rot3::identity()));

        let axis: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = axis.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let angle = rng.gen_range(0.0..std::f64::consts::PI - 0.1);
        let w = axis.map(|v| v / n * angle);
        let back = Rot3::exp(&w).log();
        explog = (0..3).map(|i| (back[i] - w[i]).abs()).fold(explog, f64::max);
        let mut v = w.to_vec();
        v.extend((0..3).map(|_| rng.gen_range(-5.0..5.0)));
        let back = Pose3::exp(&v).log();
        explog = (0..6).map(|i| (back[i] - v[i]).abs()).fold(explog, f64::max);

        for e in [Element::Pose3(a.clone()), Element::Rot3(b.rotation.clone())] {
            storage_exact &= Element::from_storage(e.element_type(), &e.to_storage())? == e;
        }
        let m = r.to_rotation_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                ortho = ortho.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        ortho = ortho.max((det - 1.0).abs());
    }
    check(
        group <= 1e-10 && explog <= 1e-9 && storage_exact && ortho <= 1e-9,
        format!("group={group:.1e} exp_log={explog:.1e} storage_exact={storage_exact} orthonormal={ortho:.1e}"),
    )
}

fn epsilon_handling() -> Result<Outcome> {
    let sinc = singularity_case("sinc")?;
    let r = verify_singularity_handling(&sinc.f_safe, &sinc.x, &sinc.eps, 0.0);
    let sinc_ok = r.verdict == Verdict::RemovableAndHandled
        && (r.true_limit() - 1.0).abs() <= 1e-6
        && (r.eps_limit() - 1.0).abs() <= 1e-6
        && r.derivative_true_limit().abs() <= 1e-6
        && r.derivative_eps_limit().abs() <= 1e-6;
    let inv = singularity_case("inv_x")?;
    let inv_verdict = verify_singularity_handling(&inv.f_safe, &inv.x, &inv.eps, 0.0).verdict;

    let eps = EpsilonPolicy::default().value;
    let mut bound = 0.0f64;
    let mut bindings = HashMap::from([(sinc.eps.clone(), eps)]);
    let mut xs: Vec<f64> = (0..=20000).map(|i| -10.0 + i as f64 * 1e-3).filter(|x| *x != 0.0).collect();
    xs.extend((1..300).flat_map(|k| [10f64.powi(-k), -(10f64.powi(-k))]));
    for x in xs {
        bindings.insert(sinc.x.clone(), x);
        let safe = sinc.f_safe.evaluate(&bindings)?;
        bound = bound.max((safe - x.sin() / x).abs());
    }
    check(
        sinc_ok && inv_verdict == Verdict::NonRemovable && bound <= eps,
        format!("sinc={} inv_x={inv_verdict} max|f_safe-f|={bound:.1e} (eps={eps:.1e})", r.verdict),
    )
}

fn localization() -> Result<Outcome> {
    let start = Instant::now();
    let noiseless = LocalizationConfig {
        sigma_point: 0.0,
        sigma_odom: 0.0,
        ..LocalizationConfig::default()
    };
    let (clean, _) = run_localization(&noiseless, 1)?;
    let (noisy, _) = run_localization(&LocalizationConfig::default(), 1)?;
    let elapsed = start.elapsed();
    let history = &noisy.dynamic.cost_history;
    let monotone = history.windows(2).all(|w| w[1] <= w[0]);
    let (dyn_ops, fixed_ops) = (noisy.problem.dynamic_op_count(), noisy.problem.fixed_op_count());
    let clean_err = clean.pose_error.0.max(clean.pose_error.1);
    let pass = clean_err <= 1e-6
        && noisy.dynamic.status.is_success()
        && noisy.dynamic.iterations <= 15
        && monotone
        && noisy.assembly_difference <= AGREEMENT_TOLERANCE
        && noisy.final_cost_difference <= AGREEMENT_TOLERANCE
        && fixed_ops < dyn_ops
        && elapsed < Duration::from_secs(30);
    check(
        pass,
        format!(
            "noiseless_err={clean_err:.1e} iterations={} monotone={monotone} assembly_diff={:.1e} cost_diff={:.1e} ops fixed={fixed_ops} dynamic={dyn_ops} time={elapsed:.2?}",
            noisy.dynamic.iterations, noisy.assembly_difference, noisy.final_cost_difference
        ),
    )
}

fn kernel_oracle() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = (0.0f64, "");
    for name in KERNEL_NAMES {
        let k = build_kernel(name)?;
        let mut ws = k.program.workspace();
        let mut out = vec![0.0; k.program.signature.output_size()];
        for _ in 0..1000 {
            let inputs = sample_inputs(&k, &mut rng);
            k.program.execute_flat(&inputs.concat(), &mut ws, &mut out)?;
            let want = tree_outputs(&k, &inputs)?;
            let err = common::max_relative_error(&out, &want);
            if err >= worst.0 {
                worst = (err, name);
            }
        }
    }
    check(
        worst.0 <= 1e-12,
        format!("{} kernels, worst max_rel_err={:.1e} ({})", KERNEL_NAMES.len(), worst.0, worst.1),
    )
}

fn main() {
    let criteria: [(&str, Criterion); 8] = [
        ("flattening example", flattening_example),
        ("sparsity example", sparsity_example),
        ("inverse-compose ledger", inverse_compose_ledger),
        ("tangent-Jacobian method equivalence", method_equivalence),
        ("geometry axioms", geometry_axioms),
        ("epsilon handling", epsilon_handling),
        ("robot localization", localization),
        ("kernel/oracle equivalence", kernel_oracle),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        println!("{} {}. {name}: {detail}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
