use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use symflat::bench::{
    build_kernel, example_matrices, random_matrix, run_inverse_compose, run_localization, run_matmul,
    singularity_case, BenchReport, LocalizationConfig, SparsityPattern, SPARSITY_PATTERNS,
};
use symflat::cse::Dialect;
use symflat::epsilon::{verify_singularity_handling, Verdict};
use symflat::optimizer::OptimizationResult;
use symflat::Expr;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Symbolic kernels, flattened code generation and benchmarks.
#[derive(Parser, Debug)]
#[command(name = "symflat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate source for a built-in kernel and print its op count.
    Gen {
        /// Kernel name, e.g. point_residual or func_4_1.
        name: String,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = DialectArg::C)]
        dialect: DialectArg,
    },
    /// Op-count and timing experiments.
    Bench {
        #[command(subcommand)]
        which: BenchCommand,
    },
    /// Worked examples.
    Example {
        #[command(subcommand)]
        which: ExampleCommand,
    },
    /// Check the epsilon handling of a built-in guarded function at its
    /// singular point. Exits 0 only if the singularity is handled.
    VerifyEpsilon {
        /// One of sinc, inv_x, rot3_exp, rot3_log, sinc_bad_derivative.
        name: String,
        /// Singular point; defaults to the function's own.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Flattened X^T Y versus separately computed X, Y and a dense product.
    Matmul {
        /// `example` for the fixed 6x6 pair (computes X Y), `diagonal`, a
        /// synthetic pattern name, or `all`.
        #[arg(long, default_value = "example")]
        pattern: String,
        /// Approximate operations per random entry.
        #[arg(long, default_value_t = 5)]
        ops_per_entry: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Inverse, compose and flattened inverse-compose kernels with Jacobians.
    InverseCompose {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand, Debug)]
enum ExampleCommand {
    /// Pose-only localization against known landmarks with odometry.
    Localization {
        #[arg(long, default_value_t = 5)]
        poses: usize,
        #[arg(long, default_value_t = 20)]
        landmarks: usize,
        #[arg(long, default_value_t = 0.05)]
        sigma_point: f64,
        #[arg(long, default_value_t = 0.02)]
        sigma_odom: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Calls per timing measurement.
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DialectArg {
    C,
    Pseudo,
}

const EXIT_INCORRECT: u8 = 1;
const EXIT_USAGE: u8 = 2;

enum Failure {
    Usage(String),
    Incorrect(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<symflat::Error> for Failure {
    fn from(e: symflat::Error) -> Self {
        match e {
            symflat::Error::UnknownFunction { .. } => Failure::Usage(e.to_string()),
            other => Failure::Incorrect(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Incorrect(msg)) => {
            eprintln!("correctness failure: {msg}");
            ExitCode::from(EXIT_INCORRECT)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INCORRECT)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen { name, out, dialect } => {
            let kernel = build_kernel(&name)?;
            let dialect = match dialect {
                DialectArg::C => Dialect::ReadableC,
                DialectArg::Pseudo => Dialect::Pseudocode,
            };
            let source = kernel.program.render_source(dialect);
            match out {
                Some(path) => {
                    fs::write(&path, source)?;
                    println!("{}: {} ops -> {}", kernel.name, kernel.program.op_count, path.display());
                }
                None => {
                    print!("{source}");
                    eprintln!("{}: {} ops", kernel.name, kernel.program.op_count);
                }
            }
            Ok(())
        }
        Command::Bench {
            which: BenchCommand::Matmul {
                pattern,
                ops_per_entry,
                common,
            },
        } => {
            let reports = matmul_reports(&pattern, ops_per_entry, &common)?;
            emit(&reports, None, &common)
        }
        Command::Bench {
            which: BenchCommand::InverseCompose { common },
        } => {
            let (_, report) = run_inverse_compose(common.seed, common.reps)?;
            emit(&[report], None, &common)
        }
        Command::Example {
            which:
                ExampleCommand::Localization {
                    poses,
                    landmarks,
                    sigma_point,
                    sigma_odom,
                    common,
                },
        } => {
            if poses < 2 || landmarks == 0 {
                return Err(Failure::Usage("need at least 2 poses and 1 landmark".into()));
            }
            let config = LocalizationConfig {
                seed: common.seed,
                poses,
                landmarks,
                sigma_point,
                sigma_odom,
            };
            let (outcome, report) = run_localization(&config, common.reps)?;
            let extra = optimization_json(&outcome.dynamic);
            emit(&[report], Some(extra), &common)
        }
        Command::VerifyEpsilon { name, x0, format } => {
            let case = singularity_case(&name)?;
            let x0 = x0.unwrap_or(case.x0);
            let report = verify_singularity_handling(&case.f_safe, &case.x, &case.eps, x0);
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&json!({
                    "function": case.name,
                    "x0": x0,
                    "verdict": report.verdict.to_string(),
                    "failed_stage": report.failed_stage.map(|s| s.to_string()),
                    "raw_value": report.raw_value_at_x0().to_string(),
                    "true_limit": report.true_limit(),
                    "eps_limit": report.eps_limit(),
                    "derivative_true_limit": report.derivative_true_limit(),
                    "derivative_eps_limit": report.derivative_eps_limit(),
                }))
                .expect("plain JSON value"),
                Format::Csv => format!(
                    "function,x0,verdict,true_limit,eps_limit,derivative_true_limit,derivative_eps_limit\n{},{},{},{},{},{},{}",
                    case.name,
                    x0,
                    report.verdict,
                    report.true_limit(),
                    report.eps_limit(),
                    report.derivative_true_limit(),
                    report.derivative_eps_limit()
                ),
                Format::Text => format!("function: {}\n{report}", case.name),
            };
            println!("{text}");
            if report.verdict == Verdict::RemovableAndHandled {
                Ok(())
            } else {
                Err(Failure::Incorrect(format!("{}: {}", case.name, report.verdict)))
            }
        }
    }
}

fn matmul_reports(pattern: &str, ops: usize, common: &Common) -> Result<Vec<BenchReport>, Failure> {
    let names: Vec<&str> = match pattern {
        "all" => std::iter::once("example")
            .chain(SPARSITY_PATTERNS.iter().map(|p| p.0))
            .collect(),
        p => vec![p],
    };
    let mut reports = Vec::new();
    for name in names {
        let (_, report) = if name == "example" {
            let (x, y) = example_matrices();
            let symbols = [Expr::symbol("a"), Expr::symbol("b")];
            run_matmul("example", &x, &y, &symbols, false, common.seed, common.reps)?
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            let pattern = if let Some(n) = name.strip_prefix("diagonal") {
                let n = n.trim_start_matches('_').parse().unwrap_or(3);
                SparsityPattern::diagonal(n)
            } else if let Some(&(n, rows, cols, fill)) = SPARSITY_PATTERNS.iter().find(|p| p.0 == name) {
                SparsityPattern::random(n, rows, cols, fill, &mut rng)
            } else {
                let valid: Vec<&str> = SPARSITY_PATTERNS.iter().map(|p| p.0).collect();
                return Err(Failure::Usage(format!(
                    "unknown pattern `{name}`; valid: example, all, diagonal_<n>, {}",
                    valid.join(", ")
                )));
            };
            let symbols: Vec<Expr> = (0..5).map(|i| Expr::symbol(&format!("s{i}"))).collect();
            let x = random_matrix(&pattern, &mut rng, &symbols, ops);
            let y = random_matrix(&pattern, &mut rng, &symbols, ops);
            run_matmul(&pattern.name, &x, &y, &symbols, true, common.seed, common.reps)?
        };
        reports.push(report);
    }
    Ok(reports)
}

fn optimization_json(r: &OptimizationResult) -> Value {
    let values: serde_json::Map<String, Value> = r
        .values
        .iter()
        .filter(|(k, _)| k.starts_with("pose_"))
        .map(|(k, v)| (k.clone(), json!(v.to_storage())))
        .collect();
    json!({
        "iterations": r.iterations,
        "status": format!("{:?}", r.status).to_lowercase(),
        "cost_history": r.cost_history,
        "values": values,
    })
}

/// Writes reports in the requested format. Refuses to emit anything if a
/// correctness check failed.
fn emit(reports: &[BenchReport], optimization: Option<Value>, common: &Common) -> Result<(), Failure> {
    let failed: Vec<String> = reports
        .iter()
        .flat_map(|r| r.rows.iter().filter(|row| !row.correct).map(move |row| format!("{}/{}", r.experiment, row.method)))
        .collect();
    if !failed.is_empty() {
        return Err(Failure::Incorrect(format!("failed checks: {}", failed.join(", "))));
    }
    let text = match common.format {
        Format::Json => {
            let mut values: Vec<Value> = reports
                .iter()
                .map(|r| serde_json::to_value(r).expect("report serializes"))
                .collect();
            if let (Some(opt), Some(Value::Object(obj))) = (optimization, values.first_mut()) {
                obj.insert("optimization".into(), opt);
            }
            let v = if values.len() == 1 { values.pop().unwrap() } else { Value::Array(values) };
            serde_json::to_string_pretty(&v).expect("plain JSON value") + "\n"
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["experiment", "method", "op_count", "time_ns", "correct"])
                .map_err(|e| Failure::Io(e.into()))?;
            for r in reports {
                for row in &r.rows {
                    let time = row.time_ns.map(|t| format!("{t:.1}")).unwrap_or_default();
                    w.write_record([
                        label(r).as_str(),
                        &row.method,
                        &row.op_count.to_string(),
                        &time,
                        &row.correct.to_string(),
                    ])
                    .map_err(|e| Failure::Io(e.into()))?;
                }
            }
            String::from_utf8(w.into_inner().map_err(|e| Failure::Io(e.into_error()))?).expect("utf-8 records")
        }
        Format::Text => {
            let mut s = String::new();
            for r in reports {
                s += &text_table(r);
            }
            if let Some(opt) = optimization {
                s += &format!(
                    "optimization: {} after {} iteration(s), cost {:.6e} -> {:.6e}\n",
                    opt["status"].as_str().unwrap_or("?"),
                    opt["iterations"],
                    opt["cost_history"][0].as_f64().unwrap_or(f64::NAN),
                    opt["cost_history"].as_array().and_then(|h| h.last()).and_then(Value::as_f64).unwrap_or(f64::NAN),
                );
            }
            s
        }
    };
    match &common.out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn label(r: &BenchReport) -> String {
    match r.meta.notes.get("pattern") {
        Some(p) => format!("{}/{p}", r.experiment),
        None => r.experiment.clone(),
    }
}

fn text_table(r: &BenchReport) -> String {
    let mut s = format!("experiment: {} (seed {}, {} reps)\n", label(r), r.meta.seed, r.meta.reps);
    s += &format!("{:<22} {:>10} {:>14} {:>8}\n", "method", "ops", "time_ns", "correct");
    for row in &r.rows {
        let time = row.time_ns.map(|t| format!("{t:.1}")).unwrap_or_else(|| "-".into());
        s += &format!("{:<22} {:>10} {:>14} {:>8}\n", row.method, row.op_count, time, row.correct);
    }
    for (k, v) in &r.meta.notes {
        s += &format!("  {k}: {v}\n");
    }
    s
}
