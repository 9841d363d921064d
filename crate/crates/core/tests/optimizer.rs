use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symflat::bench::{assembly_difference, build_localization, pose_key, run_localization, LocalizationConfig};
use symflat::geometry::{Element, ElementType, Rot3};
use symflat::optimizer::{assemble, lm_optimize, Assembler, Factor, LMParams, OptimizationStatus, Values};
use symflat::tangent_diff::{JacobianMethod, SymbolicFunction};

fn rotation_prior() -> SymbolicFunction {
    SymbolicFunction::new(
        "rotation_prior",
        vec![("R", ElementType::Rot3), ("measured", ElementType::Rot3)],
        |a| {
            let (Element::Rot3(r), Element::Rot3(m)) = (&a[0], &a[1]) else { unreachable!() };
            Element::Vector(m.local_coordinates(r).to_vec())
        },
    )
}

#[test]
fn rotation_prior_converges_to_measurement() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let target = Rot3::random(&mut rng);
    let factor = Factor::generate(&rotation_prior(), &["R", "m"], &[0], JacobianMethod::default()).unwrap();
    let mut values = Values::new();
    values.insert("R", Element::Rot3(target.retract(&[0.4, -0.3, 0.2])));
    values.insert("m", Element::Rot3(target.clone()));
    let result = lm_optimize(&[factor], &values, &LMParams::default()).unwrap();
    assert_eq!(result.status, OptimizationStatus::Converged);
    let Element::Rot3(r) = result.values.get("R").unwrap() else { panic!() };
    let err = target.local_coordinates(r);
    assert!(err.iter().all(|e| e.abs() < 1e-6), "{err:?}");
    assert_eq!(result.values.get("m").unwrap(), &Element::Rot3(target));
}

#[test]
fn gradient_matches_finite_differences() {
    let config = LocalizationConfig {
        poses: 3,
        landmarks: 6,
        ..LocalizationConfig::default()
    };
    let problem = build_localization(&config).unwrap();
    let keys: Vec<String> = (0..3).map(pose_key).collect();
    let layout = problem.initial.layout(&keys).unwrap();
    let mut assembler = Assembler::new(&problem.dynamic, layout.clone());
    let a = assembler.assemble(&problem.initial).unwrap();
    let h = 1e-6;
    for i in 0..layout.dim() {
        let mut cost = |s: f64| {
            let mut d = vec![0.0; layout.dim()];
            d[i] = s * h;
            assembler.cost(&problem.initial.retract_all(&layout, &d).unwrap()).unwrap()
        };
        let fd = (cost(1.0) - cost(-1.0)) / (2.0 * h);
        assert!((fd - a.rhs[i]).abs() <= 1e-5 * a.rhs[i].abs().max(1.0), "{i}: {fd} vs {}", a.rhs[i]);
    }
    assert!((a.hessian.clone() - a.hessian.transpose()).amax() == 0.0);
}

#[test]
fn dynamic_and_fixed_assemble_the_same_system() {
    let problem = build_localization(&LocalizationConfig::default()).unwrap();
    let (d, _) = assemble(&problem.dynamic, &problem.initial).unwrap();
    let (f, _) = assemble(&problem.fixed, &problem.initial).unwrap();
    assert!(assembly_difference(&d, &f) < 1e-8);
    assert!(problem.fixed_op_count() < problem.dynamic_op_count());
}

#[test]
fn noiseless_localization_recovers_ground_truth() {
    let config = LocalizationConfig {
        sigma_point: 0.0,
        sigma_odom: 0.0,
        ..LocalizationConfig::default()
    };
    let (out, _) = run_localization(&config, 1).unwrap();
    assert!(out.dynamic.status.is_success());
    assert!(out.pose_error.0 < 1e-6 && out.pose_error.1 < 1e-6, "{:?}", out.pose_error);
}

#[test]
fn missing_value_is_an_error() {
    let problem = build_localization(&LocalizationConfig::default()).unwrap();
    let mut partial = Values::new();
    partial.insert(pose_key(0), problem.initial.get(&pose_key(0)).unwrap().clone());
    assert!(lm_optimize(&problem.dynamic, &partial, &LMParams::default()).is_err());
}
