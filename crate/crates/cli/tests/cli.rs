use std::process::{Command, Output};

use serde_json::Value;

fn symflat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symflat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gen_writes_source_and_reports_ops() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("func.c");
    let o = symflat(&["gen", "func_4_1", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("6 ops"));
    let src = std::fs::read_to_string(&path).unwrap();
    assert!(src.contains("fabs") || src.contains("abs"));
}

#[test]
fn gen_unknown_kernel_is_usage_error() {
    let o = symflat(&["gen", "no_such_kernel"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("point_residual"));
}

#[test]
fn bad_flag_is_usage_error() {
    assert_eq!(symflat(&["bench", "matmul", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(symflat(&["bench", "matmul", "--pattern", "xyz", "--reps", "10"]).status.code(), Some(2));
}

#[test]
fn matmul_json_report() {
    let o = symflat(&["bench", "matmul", "--reps", "202", "--format", "json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["experiment"], "matmul");
    let rows = v["rows"].as_array().unwrap();
    let flat = rows.iter().find(|r| r["method"] == "flattened").unwrap();
    assert!(flat["op_count"].as_u64().unwrap() <= 45);
    assert!(rows.iter().all(|r| r["correct"] == true));
    assert!(flat["time_ns"].as_f64().unwrap() > 0.0);
}

#[test]
fn inverse_compose_csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ic.csv");
    let o = symflat(&[
        "bench",
        "inverse-compose",
        "--reps",
        "202",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "experiment,method,op_count,time_ns,correct");
    let methods: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(methods, ["inverse+jacobian", "compose+jacobian", "chained", "flattened"]);
}

#[test]
fn localization_json_has_optimization() {
    let o = symflat(&["example", "localization", "--reps", "1", "--format", "json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let opt = &v["optimization"];
    assert_eq!(opt["status"], "converged");
    let hist: Vec<f64> = opt["cost_history"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_f64().unwrap())
        .collect();
    assert!(hist.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(opt["values"].as_object().unwrap().len(), 5);
}

#[test]
fn verify_epsilon_exit_codes() {
    assert_eq!(symflat(&["verify-epsilon", "sinc"]).status.code(), Some(0));
    assert_eq!(symflat(&["verify-epsilon", "rot3_log"]).status.code(), Some(0));
    assert_eq!(symflat(&["verify-epsilon", "inv_x"]).status.code(), Some(1));
    assert_eq!(symflat(&["verify-epsilon", "sinc_bad_derivative"]).status.code(), Some(1));
    assert_eq!(symflat(&["verify-epsilon", "cosh"]).status.code(), Some(2));
}

#[test]
fn verify_epsilon_json() {
    let o = symflat(&["verify-epsilon", "sinc", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["true_limit"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(v["derivative_eps_limit"].as_f64().unwrap().abs() < 1e-6);
}
