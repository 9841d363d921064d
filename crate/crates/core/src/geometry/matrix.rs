use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{add, diff_many, substitute_many, Expr};

/// Small dense matrix of expressions, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Expr>,
}

impl SymMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Expr>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(SymMatrix { rows, cols, entries })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Expr) -> Self {
        let entries = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        SymMatrix { rows, cols, entries }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        SymMatrix::from_fn(rows, cols, |_, _| Expr::zero())
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix::from_fn(n, n, |i, j| if i == j { Expr::one() } else { Expr::zero() })
    }

    pub fn column(entries: Vec<Expr>) -> Self {
        let rows = entries.len();
        SymMatrix { rows, cols: 1, entries }
    }

    /// Matrix of fresh symbols `name[i]`, numbered row-major.
    pub fn symbols(name: &str, rows: usize, cols: usize) -> Self {
        SymMatrix::from_fn(rows, cols, |i, j| Expr::symbol(&format!("{name}[{}]", i * cols + j)))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Expr> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: Expr) {
        self.entries[i * self.cols + j] = e;
    }

    pub fn transpose(&self) -> Self {
        SymMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    /// Product with structurally zero terms skipped.
    pub fn matmul(&self, other: &SymMatrix) -> Result<SymMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(SymMatrix::from_fn(self.rows, other.cols, |i, j| {
            add((0..self.cols).filter_map(|k| {
                let (a, b) = (self.get(i, k), other.get(k, j));
                (!a.is_zero() && !b.is_zero()).then(|| a * b)
            }))
        }))
    }

    fn zip_with(&self, other: &SymMatrix, f: impl Fn(&Expr, &Expr) -> Expr) -> Result<SymMatrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| f(a, b)).collect();
        Ok(SymMatrix {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: &Expr) -> SymMatrix {
        self.map(|e| s * e)
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> SymMatrix {
        SymMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    /// Jacobian of the row-major flattened entries with respect to `wrt`:
    /// a `(rows * cols) x wrt.len()` matrix.
    pub fn jacobian(&self, wrt: &[Expr]) -> SymMatrix {
        let (n, m) = (self.entries.len(), wrt.len());
        let mut entries = vec![Expr::zero(); n * m];
        for (j, s) in wrt.iter().enumerate() {
            for (i, d) in diff_many(&self.entries, s).into_iter().enumerate() {
                entries[i * m + j] = d;
            }
        }
        SymMatrix { rows: n, cols: m, entries }
    }

    pub fn substitute(&self, bindings: &HashMap<Expr, Expr>) -> SymMatrix {
        SymMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: substitute_many(&self.entries, bindings),
        }
    }

    pub fn evaluate(&self, bindings: &HashMap<Expr, f64>) -> Result<Vec<f64>> {
        let mut ev = crate::expr::Evaluator::new(bindings);
        self.entries.iter().map(|e| ev.eval(e)).collect()
    }

    /// Horizontal concatenation.
    pub fn hstack(blocks: &[SymMatrix]) -> Result<SymMatrix> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        if blocks.iter().any(|b| b.rows != rows) {
            return Err(Error::DimensionMismatch("hstack of blocks with different row counts".into()));
        }
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for b in blocks {
                entries.extend_from_slice(&b.entries[i * b.cols..(i + 1) * b.cols]);
            }
        }
        Ok(SymMatrix { rows, cols, entries })
    }
}

impl fmt::Display for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}
