use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{relative_error, BenchReport};
use super::timing::median_ns;
use crate::cse::{compile, InstructionProgram, KernelSignature, Shape};
use crate::error::Result;
use crate::expr::{count_ops, CountMode, Expr};
use crate::geometry::SymMatrix;

/// Nonzero structure shared by both factors of a product.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsityPattern {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Row-major sorted `(row, col)` positions.
    pub nonzeros: Vec<(usize, usize)>,
}

impl SparsityPattern {
    pub fn fill(&self) -> f64 {
        self.nonzeros.len() as f64 / (self.rows * self.cols) as f64
    }

    /// `round(fill * rows * cols)` positions drawn uniformly without
    /// replacement.
    pub fn random<R: Rng + ?Sized>(name: &str, rows: usize, cols: usize, fill: f64, rng: &mut R) -> Self {
        let total = rows * cols;
        let count = ((fill * total as f64).round() as usize).clamp(1, total);
        let mut idx = sample(rng, total, count).into_vec();
        idx.sort_unstable();
        SparsityPattern {
            name: name.to_string(),
            rows,
            cols,
            nonzeros: idx.into_iter().map(|i| (i / cols, i % cols)).collect(),
        }
    }

    pub fn diagonal(n: usize) -> Self {
        SparsityPattern {
            name: format!("diagonal_{n}"),
            rows: n,
            cols: n,
            nonzeros: (0..n).map(|i| (i, i)).collect(),
        }
    }
}

/// Shapes and fills of the sparse test matrices the synthetic patterns
/// stand in for.
pub const SPARSITY_PATTERNS: &[(&str, usize, usize, f64)] = &[
    ("b1_ss", 7, 7, 0.31),
    ("Tina_DisCog", 11, 11, 0.40),
    ("n3c4_b2", 20, 15, 0.20),
    ("bibd_9_3", 36, 84, 0.08),
    ("lp_sc105", 105, 163, 0.02),
    ("rotor1", 100, 100, 0.07),
];

/// The hand-written 6x6 pair over symbols `a` and `b`.
pub fn example_matrices() -> (SymMatrix, SymMatrix) {
    let (a, b) = (Expr::symbol("a"), Expr::symbol("b"));
    let z = Expr::zero;
    let x = vec![
        a.clone(), z(), b.clone(), 2.0 * &b, z(), z(),
        z(), &a * &b, z(), &a / &b, a.powi(2), z(),
        z(), z(), &a * b.powi(2), z(), &a / b.powi(2), z(),
        &a / b.powi(3), z(), z(), &a * b.powi(3), z(), &a / b.powi(4),
        z(), b.powi(2), z(), z(), &a * b.powi(4), z(),
        z(), z(), z(), z(), z(), &a * b.powi(4),
    ];
    let y = vec![
        z(), -(&a * &b), b.clone(), z(), z(), z(),
        &a * &b, z(), -&a, z(), z(), z(),
        -&b, a.clone(), z(), z(), z(), z(),
        z(), a.powi(2), z(), a.clone(), z(), z(),
        z(), z(), b.powi(2), z(), b.clone(), z(),
        a.powi(2), z(), z(), z(), z(), &a * &b,
    ];
    (
        SymMatrix::new(6, 6, x).expect("6x6"),
        SymMatrix::new(6, 6, y).expect("6x6"),
    )
}

/// Random expression with about `ops` operations from `{+, *, /, ^2}` over
/// `symbols`. Leaves are symbols, so values stay positive for positive
/// inputs and denominators never vanish.
pub fn random_entry<R: Rng + ?Sized>(rng: &mut R, symbols: &[Expr], ops: usize) -> Expr {
    if ops == 0 {
        return symbols[rng.gen_range(0..symbols.len())].clone();
    }
    match rng.gen_range(0..4) {
        0 => random_entry(rng, symbols, ops - 1).powi(2),
        op => {
            let left = rng.gen_range(0..ops);
            let l = random_entry(rng, symbols, left);
            let r = random_entry(rng, symbols, ops - 1 - left);
            match op {
                1 => l + r,
                2 => l * r,
                _ => l / r,
            }
        }
    }
}

pub fn random_matrix<R: Rng + ?Sized>(pattern: &SparsityPattern, rng: &mut R, symbols: &[Expr], ops: usize) -> SymMatrix {
    let mut m = SymMatrix::zeros(pattern.rows, pattern.cols);
    for &(r, c) in &pattern.nonzeros {
        m.set(r, c, random_entry(rng, symbols, ops));
    }
    m
}

/// `X^T Y`, skipping structurally zero products.
pub fn product_transpose(x: &SymMatrix, y: &SymMatrix) -> Result<SymMatrix> {
    x.transpose().matmul(y)
}

/// Symbolic count of a dense `(m, k) x (k, n)` product.
pub fn dense_product_ops(m: usize, k: usize, n: usize) -> usize {
    m * n * (2 * k - 1)
}

#[derive(Clone, Debug)]
pub struct MatmulOutcome {
    pub flattened: InstructionProgram,
    pub x: InstructionProgram,
    pub y: InstructionProgram,
    pub dense_ops: usize,
    /// Compiled `X` and `Y` plus the dense product.
    pub chained_ops: usize,
    /// Per-occurrence entry counts of `X` and `Y` plus the dense product.
    pub per_occurrence_ops: u64,
    pub max_error: f64,
}

fn entries_kernel(name: &str, symbols: &[Expr], out: &str, m: &SymMatrix) -> Result<InstructionProgram> {
    let mut sig = KernelSignature::new(name);
    for s in symbols {
        sig = sig.input(s.as_symbol().expect("symbol"), Shape::Scalar);
    }
    let sig = sig.output(out, Shape::Matrix { rows: m.rows(), cols: m.cols() });
    compile(sig, m.entries())
}

fn evaluate_dense(m: &SymMatrix, bindings: &HashMap<Expr, f64>) -> Result<DMatrix<f64>> {
    Ok(DMatrix::from_row_slice(m.rows(), m.cols(), &m.evaluate(bindings)?))
}

/// Compares the flattened product (`X^T Y` if `transpose`, else `X Y`)
/// against separately compiled factors plus a dense runtime product.
pub fn run_matmul(
    name: &str,
    x: &SymMatrix,
    y: &SymMatrix,
    symbols: &[Expr],
    transpose: bool,
    seed: u64,
    reps: usize,
) -> Result<(MatmulOutcome, BenchReport)> {
    let product = if transpose { product_transpose(x, y)? } else { x.matmul(y)? };
    let flattened = entries_kernel("product", symbols, "product", &product)?;
    let xk = entries_kernel("x", symbols, "x", x)?;
    let yk = entries_kernel("y", symbols, "y", y)?;
    let (m, k) = if transpose { (x.cols(), x.rows()) } else { (x.rows(), x.cols()) };
    let dense_ops = dense_product_ops(m, k, y.cols());
    let tree: u64 = x
        .entries()
        .iter()
        .chain(y.entries())
        .map(|e| count_ops(e, CountMode::Tree))
        .sum();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error = 0.0f64;
    let mut sample = Vec::new();
    for _ in 0..100 {
        let values: Vec<f64> = symbols.iter().map(|_| rng.gen_range(0.5..2.0)).collect();
        let bindings: HashMap<Expr, f64> = symbols.iter().cloned().zip(values.iter().copied()).collect();
        let (xn, yn) = (evaluate_dense(x, &bindings)?, evaluate_dense(y, &bindings)?);
        let expected = if transpose { xn.transpose() * yn } else { xn * yn };
        let got = flattened.execute(&values.iter().map(std::slice::from_ref).collect::<Vec<_>>())?;
        for (g, e) in got[0].iter().zip(expected.transpose().iter()) {
            max_error = max_error.max(relative_error(*g, *e));
        }
        sample = values;
    }
    let correct = max_error <= 1e-9;

    let outcome = MatmulOutcome {
        chained_ops: xk.op_count + yk.op_count + dense_ops,
        per_occurrence_ops: tree + dense_ops as u64,
        dense_ops,
        flattened,
        x: xk,
        y: yk,
        max_error,
    };
    let mut report = BenchReport::new("matmul", seed, reps);
    report.note("pattern", name);
    report.note("shape", format!("{}x{}", x.rows(), x.cols()));
    report.note("per_occurrence_ops", outcome.per_occurrence_ops);
    report.note("max_error", format!("{max_error:.3e}"));
    let o = &outcome;
    report.row("flattened", o.flattened.op_count as u64, correct, || {
        let mut ws = o.flattened.workspace();
        let mut out = vec![0.0; product.rows() * product.cols()];
        median_ns(reps, || o.flattened.execute_flat(&sample, &mut ws, &mut out).unwrap())
    });
    report.row("dense_runtime", o.chained_ops as u64, correct, || {
        let (mut wx, mut wy) = (o.x.workspace(), o.y.workspace());
        let mut xo = DMatrix::zeros(x.cols(), x.rows());
        let mut yo = DMatrix::zeros(y.cols(), y.rows());
        median_ns(reps, || {
            o.x.execute_flat(&sample, &mut wx, xo.as_mut_slice()).unwrap();
            o.y.execute_flat(&sample, &mut wy, yo.as_mut_slice()).unwrap();
            // Buffers hold the row-major outputs, i.e. the transposes.
            let p = if transpose { &xo * yo.transpose() } else { xo.transpose() * yo.transpose() };
            std::hint::black_box(p);
        })
    });
    Ok((outcome, report))
}
